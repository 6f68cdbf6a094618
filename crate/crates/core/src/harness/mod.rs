//! Replicated experiments: regime classification, CLT statistics, rate fits and
//! report emission.

mod clt;
mod config;
mod emit;
mod ergodic;
mod rate;
mod regime;
mod run;
mod stats;

pub use clt::{
    run_clt_experiment, CheckpointStats, CltReport, MeanShift, PredictionSource,
    VariancePrediction,
};
pub use config::ExperimentConfig;
pub use emit::{emit, render, OutputFormat, Tabular};
pub use ergodic::{
    run_ergodic_experiment, run_single_trace, ErgodicCheckpoint, ErgodicReport, TraceReport,
};
pub use rate::{run_rate_experiment, theoretical_exponent, RateReport, SLOPE_TOLERANCE};
pub use regime::{
    analytic_regime, classify_regime, finite_l_hat, Regime, RegimeClassification, FLAT_SLOPE,
    MIN_HORIZON,
};
pub use run::{run_replications, ExcludedReplication, Snapshot, MAX_DIVERGED_FRACTION};
pub use stats::{fit_loglog_slope, ks_normality, KsResult, SlopeFit, KS_CRITICAL_001};
