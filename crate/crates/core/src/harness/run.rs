//! Per-replication trajectories with checkpoint snapshots.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::empirical::{AnalyticLaw1D, WeightedEmpiricalMeasure};
use crate::error::{Error, Result};
use crate::model::{vf_operator, Diffusion, GeneratorObservable, Observable};
use crate::schedules::ScheduleRecord;
use crate::schemes::{simulate, StateSink};
use crate::sum::CompensatedSum;

/// Runs `job(r)` for r = 0..replications, in parallel or serially; results come
/// back in replication order either way.
pub fn run_replications<T, F>(replications: usize, parallel: bool, job: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..replications as u64).into_par_iter().map(&job).collect()
    } else {
        (0..replications as u64).map(job).collect()
    }
}

/// Quantities of ν_n at one checkpoint of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    /// Σ γ_k over the recorded atoms.
    pub big_gamma: f64,
    pub big_h: f64,
    pub nu_f: f64,
    pub nu_af: f64,
    /// γ-weighted average of 𝔙f (NaN when not tracked).
    pub nu_vf: f64,
    /// H_n/(C√Γ_n) · ν_n(Af).
    pub statistic: f64,
    /// W₁(ν_n, reference) from the sample buffer (NaN when not tracked).
    pub w1: f64,
}

/// What a trajectory accumulates besides ν_n(f) and ν_n(Af).
#[derive(Clone, Default)]
pub(crate) struct TraceOptions {
    pub vf: bool,
    pub law: Option<AnalyticLaw1D>,
    /// Keep the decimated η-weighted atoms after the run.
    pub keep_buffer: bool,
}

pub(crate) struct Trace {
    model: Arc<dyn Diffusion>,
    f: Arc<dyn Observable>,
    af: GeneratorObservable,
    c: f64,
    opts: TraceOptions,
    checkpoints: Vec<u64>,
    next: usize,
    seen: u64,
    burn_in: u64,
    n: u64,
    eta_f: CompensatedSum,
    eta_af: CompensatedSum,
    gamma_vf: CompensatedSum,
    big_h: CompensatedSum,
    big_gamma: CompensatedSum,
    buffer: Option<WeightedEmpiricalMeasure>,
    pub snapshots: Vec<Snapshot>,
}

impl Trace {
    pub fn new(cfg: &ExperimentConfig, checkpoints: Vec<u64>, opts: TraceOptions) -> Result<Self> {
        let model = cfg.build_model()?;
        let f = cfg.observable()?;
        let af = GeneratorObservable::new(model.clone(), f.clone())?;
        let buffer = if opts.law.is_some() || opts.keep_buffer {
            Some(
                WeightedEmpiricalMeasure::new(model.dim())
                    .with_buffer(cfg.buffer_capacity, cfg.n_steps)?,
            )
        } else {
            None
        };
        Ok(Self {
            model,
            f,
            af,
            c: cfg.weights()?.c(),
            opts,
            checkpoints,
            next: 0,
            seen: 0,
            burn_in: cfg.burn_in,
            n: 0,
            eta_f: CompensatedSum::new(),
            eta_af: CompensatedSum::new(),
            gamma_vf: CompensatedSum::new(),
            big_h: CompensatedSum::new(),
            big_gamma: CompensatedSum::new(),
            buffer,
            snapshots: Vec::new(),
        })
    }

    pub fn buffer(&self) -> Option<&WeightedEmpiricalMeasure> {
        self.buffer.as_ref()
    }

    fn snapshot(&self) -> Result<Snapshot> {
        let h = self.big_h.value();
        let g = self.big_gamma.value();
        let nu = |s: &CompensatedSum| if h > 0.0 { s.value() / h } else { f64::NAN };
        let w1 = match (&self.opts.law, &self.buffer) {
            (Some(law), Some(buf)) => buf.wasserstein1_to(law)?,
            _ => f64::NAN,
        };
        Ok(Snapshot {
            n: self.n,
            big_gamma: g,
            big_h: h,
            nu_f: nu(&self.eta_f),
            nu_af: nu(&self.eta_af),
            nu_vf: if self.opts.vf && g > 0.0 {
                self.gamma_vf.value() / g
            } else {
                f64::NAN
            },
            statistic: self.eta_af.value() / (self.c * g.sqrt()),
            w1,
        })
    }
}

impl StateSink for Trace {
    fn record(&mut self, rec: &ScheduleRecord, x: &[f64]) -> Result<()> {
        self.seen += 1;
        if self.seen <= self.burn_in {
            return Ok(());
        }
        self.n += 1;
        let eta = rec.eta;
        self.big_h.add(eta);
        self.big_gamma.add(rec.gamma);
        self.eta_f.add(eta * self.f.value(x));
        self.eta_af.add(eta * self.af.value(x));
        if self.opts.vf {
            self.gamma_vf
                .add(rec.gamma * vf_operator(self.model.as_ref(), self.f.as_ref(), x)?);
        }
        if let Some(buf) = &mut self.buffer {
            buf.record(x, eta)?;
        }
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] == self.n {
            let snap = self.snapshot()?;
            self.snapshots.push(snap);
            self.next += 1;
        }
        Ok(())
    }
}

/// Runs replication `r` of `cfg` for `n_steps + burn_in` steps.
pub(crate) fn run_trace(cfg: &ExperimentConfig, opts: &TraceOptions, r: u64) -> Result<Trace> {
    let mut trace = Trace::new(cfg, cfg.checkpoint_list(), opts.clone())?;
    let model = cfg.build_model()?;
    let weights = cfg.weights()?;
    let x0 = cfg.initial_state(model.dim())?;
    simulate(
        cfg.scheme,
        model.as_ref(),
        &weights,
        cfg.innovation,
        cfg.n_steps + cfg.burn_in,
        &x0,
        cfg.seed,
        r,
        &mut [&mut trace],
    )?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedReplication {
    pub replication: u64,
    pub seed: u64,
    pub reason: String,
}

/// Largest tolerated fraction of diverged replications.
pub const MAX_DIVERGED_FRACTION: f64 = 0.05;

/// Splits results into kept (replication, value) pairs and diverged runs;
/// any other error is returned as is.
pub(crate) fn partition<T>(
    results: Vec<Result<T>>,
    seed: u64,
) -> Result<(Vec<(u64, T)>, Vec<ExcludedReplication>)> {
    let total = results.len();
    let mut kept = Vec::with_capacity(total);
    let mut excluded = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => kept.push((r as u64, v)),
            Err(e @ Error::Divergence { .. }) => excluded.push(ExcludedReplication {
                replication: r as u64,
                seed,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if excluded.len() as f64 > MAX_DIVERGED_FRACTION * total as f64 {
        return Err(Error::TooManyDivergences {
            failed: excluded.len(),
            total,
            indices: excluded.iter().map(|e| e.replication).collect(),
        });
    }
    Ok((kept, excluded))
}
