//! Invariant distributions of ergodic diffusions by decreasing-step weighted
//! empirical measures, with the Euler and Talay (weak order 2) schemes and an
//! experiment harness for the associated central limit theorems.

pub mod diagnostics;
pub mod empirical;
pub mod error;
pub mod harness;
pub mod model;
pub mod quadrature;
pub mod schedules;
pub mod schemes;
pub mod sum;

pub use error::{Error, Result};
