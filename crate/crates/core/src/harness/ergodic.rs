//! Replicated ergodic averages ν_n^η(f) and W₁ to the invariant law.

use serde::{Deserialize, Serialize};

use super::clt::expect_fallible;
use super::config::ExperimentConfig;
use super::run::{
    partition, run_replications, run_trace, ExcludedReplication, Snapshot, TraceOptions,
};
use crate::empirical::AnalyticLaw1D;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicCheckpoint {
    pub n: u64,
    /// ν_n(f) per kept replication.
    pub nu_f: Vec<(u64, f64)>,
    pub nu_f_mean: f64,
    /// W₁(ν_n, ν) per kept replication (empty when ν is unknown or d > 1).
    pub w1: Vec<(u64, f64)>,
    pub w1_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub replications: usize,
    /// ν(f) under the catalog invariant law, when known.
    pub reference: Option<f64>,
    pub checkpoints: Vec<ErgodicCheckpoint>,
    pub excluded: Vec<ExcludedReplication>,
}

fn mean(values: &[(u64, f64)]) -> f64 {
    values.iter().map(|v| v.1).collect::<CompensatedSum>().value() / values.len() as f64
}

/// Runs the configured replications, recording ν_n(f) and, for one-dimensional
/// models with a known invariant law, W₁ between the buffered atoms and it.
pub fn run_ergodic_experiment(cfg: &ExperimentConfig, parallel: bool) -> Result<ErgodicReport> {
    cfg.validate()?;
    if cfg.replications == 0 {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let law = cfg.model.invariant_law()?;
    let f = cfg.observable()?;
    let reference = match &law {
        Some(l) => Some(expect_fallible(l, |x| Ok(f.value(x)))?),
        None => None,
    };
    let law_1d = match &law {
        Some(l) if l.dim() == 1 => Some(AnalyticLaw1D::from_invariant(l)?),
        _ => None,
    };
    let opts = TraceOptions {
        vf: false,
        law: law_1d,
        keep_buffer: false,
    };
    let results = run_replications(cfg.replications, parallel, |r| {
        run_trace(cfg, &opts, r).map(|t| t.snapshots)
    });
    let (kept, excluded) = partition(results, cfg.seed)?;
    if kept.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let checkpoints = cfg
        .checkpoint_list()
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let snap = |t: &Vec<Snapshot>| t[i];
            let nu_f: Vec<(u64, f64)> = kept.iter().map(|(r, t)| (*r, snap(t).nu_f)).collect();
            let w1: Vec<(u64, f64)> = kept
                .iter()
                .map(|(r, t)| (*r, snap(t).w1))
                .filter(|(_, w)| !w.is_nan())
                .collect();
            ErgodicCheckpoint {
                n,
                nu_f_mean: mean(&nu_f),
                nu_f,
                w1_mean: (!w1.is_empty()).then(|| mean(&w1)),
                w1,
            }
        })
        .collect();
    Ok(ErgodicReport {
        replications: cfg.replications,
        reference,
        checkpoints,
        excluded,
    })
}

/// Checkpoint snapshots of a single trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub replication: u64,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
}

pub fn run_single_trace(cfg: &ExperimentConfig, replication: u64) -> Result<TraceReport> {
    cfg.validate()?;
    let t = run_trace(cfg, &TraceOptions::default(), replication)?;
    Ok(TraceReport {
        replication,
        seed: cfg.seed,
        snapshots: t.snapshots,
    })
}
