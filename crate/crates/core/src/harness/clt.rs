//! Replicated CLT experiment on S_n = H_n/(C√Γ_n) · ν_n^η(Af).

use std::cell::RefCell;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::regime::{classify_regime, Regime, RegimeClassification};
use super::run::{partition, run_replications, run_trace, ExcludedReplication, TraceOptions};
use super::stats::{ks_normality, KsResult};
use crate::empirical::{merge_statistics, SummaryStats};
use crate::error::{Error, Result};
use crate::model::{
    m1_euler, m2_talay, vf_operator, Diffusion, InvariantLaw, Observable, Quadrature,
};
use crate::schedules::WeightKind;
use crate::schemes::Scheme;
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    /// Expectation under the closed-form invariant law.
    Analytic,
    /// Average over the simulated empirical measures.
    Ergodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePrediction {
    /// ν(𝔙f) used as the limiting variance.
    pub value: f64,
    pub source: PredictionSource,
    pub analytic: Option<f64>,
    /// Mean over replications of ν_n^γ(𝔙f) at the last checkpoint.
    pub ergodic: f64,
    /// |ergodic − analytic| ≤ 10% |analytic|, when both exist.
    pub cross_check_passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShift {
    /// ν(𝔐_q f).
    pub nu_m: f64,
    pub source: PredictionSource,
    /// l̂ = lim √Γ_n / Σγ_k^{q+1} from the power-law asymptotics.
    pub l_hat: f64,
    /// l̂⁻¹ ν(𝔐_q f).
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub n: u64,
    /// (replication, S_n) for every kept replication.
    pub statistics: Vec<(u64, f64)>,
    pub summary: SummaryStats,
    /// √Γ_n / Σ_{k≤n} γ_k^{q+1} (regime B only).
    pub l_hat_n: Option<f64>,
    /// Mean under the limit hypothesis at this n.
    pub hypothesis_mean: Option<f64>,
    pub ks: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub scheme: Scheme,
    pub order: usize,
    pub xi: f64,
    pub replications: usize,
    pub seed: u64,
    pub regime: Regime,
    pub classification: RegimeClassification,
    pub checkpoints: Vec<CheckpointStats>,
    pub variance: VariancePrediction,
    pub mean_shift: Option<MeanShift>,
    pub excluded: Vec<ExcludedReplication>,
    pub caveats: Vec<String>,
}

/// E_ν[g] with errors from `g` propagated.
pub(crate) fn expect_fallible(
    law: &InvariantLaw,
    g: impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let err = RefCell::new(None);
    let v = law.expect(|x| match g(x) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    })?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// 𝔐_q f(x) for the configured scheme: Euler 𝔐₁ or Talay 𝔐₂.
fn correction(
    cfg: &ExperimentConfig,
    model: &Arc<dyn Diffusion>,
    f: &Arc<dyn Observable>,
    x: &[f64],
) -> Result<f64> {
    let e = match cfg.scheme {
        Scheme::Euler => m1_euler(model.as_ref(), f.as_ref(), x, cfg.innovation, Quadrature::Enumerate)?,
        Scheme::Talay2 => m2_talay(model, f, x, cfg.innovation, Quadrature::Enumerate)?,
    };
    Ok(e.value)
}

fn check_weights(cfg: &ExperimentConfig) -> Result<()> {
    let want = match cfg.scheme {
        Scheme::Euler => WeightKind::Proportional,
        Scheme::Talay2 => WeightKind::Trapezoidal,
    };
    let got = cfg.resolved_weight_kind();
    if got != want {
        return Err(Error::Config(format!(
            "{} needs {want:?} weights for the CLT statistic, got {got:?}",
            cfg.scheme
        )));
    }
    Ok(())
}

/// Closed-form l̂ for γ_n = γ₁n^{-ξ}: √(γ₁/(1−ξ)) · (1 − (q+1)ξ) / γ₁^{q+1}.
fn l_hat_limit(gamma1: f64, xi: f64, q: usize) -> f64 {
    let p = (q + 1) as f64;
    (gamma1 / (1.0 - xi)).sqrt() * (1.0 - p * xi) / gamma1.powf(p)
}

pub fn run_clt_experiment(cfg: &ExperimentConfig, parallel: bool) -> Result<CltReport> {
    cfg.validate()?;
    if cfg.replications < 2 {
        return Err(Error::NotEnoughSamples {
            needed: 2,
            got: cfg.replications,
        });
    }
    check_weights(cfg)?;
    let q = cfg.scheme.order();
    let step = cfg.step()?;
    let classification = classify_regime(&step, q, cfg.n_steps)?;
    let regime = classification.regime;
    let model = cfg.build_model()?;
    let f = cfg.observable()?;
    let law = cfg.model.invariant_law()?;
    let mut caveats = vec![
        "checkpoints share one trajectory per replication, so statistics across checkpoints are correlated"
            .to_string(),
    ];

    let opts = TraceOptions {
        vf: true,
        law: None,
        keep_buffer: regime == Regime::BMixed && law.is_none(),
    };
    let results = run_replications(cfg.replications, parallel, |r| run_trace(cfg, &opts, r));
    let (kept, excluded) = partition(results, cfg.seed)?;
    if kept.len() < 2 {
        return Err(Error::NotEnoughSamples {
            needed: 2,
            got: kept.len(),
        });
    }

    let ergodic_vf = kept
        .iter()
        .map(|(_, t)| t.snapshots.last().map_or(f64::NAN, |s| s.nu_vf))
        .collect::<CompensatedSum>()
        .value()
        / kept.len() as f64;
    let analytic_vf = match &law {
        Some(l) => Some(expect_fallible(l, |x| vf_operator(model.as_ref(), f.as_ref(), x))?),
        None => None,
    };
    let variance = VariancePrediction {
        value: analytic_vf.unwrap_or(ergodic_vf),
        source: if analytic_vf.is_some() {
            PredictionSource::Analytic
        } else {
            PredictionSource::Ergodic
        },
        analytic: analytic_vf,
        ergodic: ergodic_vf,
        cross_check_passed: analytic_vf
            .map(|a| (ergodic_vf - a).abs() <= 0.1 * a.abs() + 1e-12),
    };
    if variance.cross_check_passed == Some(false) {
        caveats.push(format!(
            "ergodic estimate {ergodic_vf} of the limiting variance is more than 10% away from the analytic value {}",
            variance.value
        ));
    }

    let mean_shift = if regime == Regime::BMixed {
        let (nu_m, source) = match &law {
            Some(l) => (expect_fallible(l, |x| correction(cfg, &model, &f, x))?, PredictionSource::Analytic),
            None => {
                let mut acc = CompensatedSum::new();
                for (_, t) in &kept {
                    let buf = t.buffer().and_then(|b| b.buffer()).unwrap_or_default();
                    let mut num = CompensatedSum::new();
                    let mut den = CompensatedSum::new();
                    for (x, w) in buf {
                        num.add(w * correction(cfg, &model, &f, x)?);
                        den.add(w);
                    }
                    acc.add(num.value() / den.value());
                }
                (acc.value() / kept.len() as f64, PredictionSource::Ergodic)
            }
        };
        let l_hat = l_hat_limit(cfg.gamma1, cfg.xi, q);
        Some(MeanShift {
            nu_m,
            source,
            l_hat,
            shift: nu_m / l_hat,
        })
    } else {
        None
    };
    if regime == Regime::CBias {
        caveats.push("regime C: the normalized statistic is dominated by the bias; no normality test".into());
    }

    let mut checkpoints = Vec::new();
    for (i, n) in cfg.checkpoint_list().into_iter().enumerate() {
        let statistics: Vec<(u64, f64)> = kept
            .iter()
            .map(|(r, t)| (*r, t.snapshots[i].statistic))
            .collect();
        let values: Vec<f64> = statistics.iter().map(|s| s.1).collect();
        let summary = merge_statistics(&values)?;
        let l_hat_n = mean_shift
            .as_ref()
            .map(|_| super::regime::finite_l_hat(&step, q, n));
        let hypothesis_mean = match regime {
            Regime::ACentered => Some(0.0),
            Regime::BMixed => mean_shift.as_ref().zip(l_hat_n).map(|(m, l)| m.nu_m / l),
            Regime::CBias => None,
        };
        let ks = match hypothesis_mean {
            Some(mean) if variance.value > 0.0 && values.len() >= 50 => {
                Some(ks_normality(&values, variance.value, mean)?)
            }
            _ => None,
        };
        checkpoints.push(CheckpointStats {
            n,
            statistics,
            summary,
            l_hat_n,
            hypothesis_mean,
            ks,
        });
    }
    if kept.len() < 50 {
        caveats.push(format!("{} replications: too few for the KS test", kept.len()));
    }

    Ok(CltReport {
        scheme: cfg.scheme,
        order: q,
        xi: cfg.xi,
        replications: cfg.replications,
        seed: cfg.seed,
        regime,
        classification,
        checkpoints,
        variance,
        mean_shift,
        excluded,
        caveats,
    })
}
