//! One-step transition kernels (Euler, Talay weak order 2) and their innovations.

pub mod innovation;
pub mod step;

pub use innovation::{
    enumerate_outcomes, rng_stream, InnovationDist, LevyAreaSurrogate, Outcome, RngStream,
    ENUMERATION_CAP,
};
pub use step::{
    euler_step, simulate, talay_increments, talay_step, Scheme, SchemeState, StateSink, Stepper,
    TalayIncrements, DIVERGENCE_BOUND,
};
