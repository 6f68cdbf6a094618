//! CLT regime of a power-law step sequence for a scheme of weak order q.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::{StepKind, StepSchedule};
use crate::sum::CompensatedSum;

/// Slope band of r_n = √Γ_n / Σ γ_k^{q+1} treated as flat.
pub const FLAT_SLOPE: f64 = 0.02;

/// Smallest horizon used by the numeric trend.
pub const MIN_HORIZON: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// r_n → ∞: centered Gaussian limit.
    ACentered,
    /// r_n → l̂ ∈ (0, ∞): Gaussian limit shifted by l̂⁻¹ν(𝔐_q f).
    BMixed,
    /// r_n → 0: the bias dominates.
    CBias,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::ACentered => "A_centered",
            Regime::BMixed => "B_mixed",
            Regime::CBias => "C_bias",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeClassification {
    pub regime: Regime,
    /// Regime read off the exponent ((2q+1)ξ − 1)/2 of r_n.
    pub analytic: Regime,
    /// Log-log slope of r_n over the last decade before the horizon.
    pub slope: f64,
    pub horizon: u64,
    /// r at the horizon, the finite-n value of l̂.
    pub r_final: f64,
}

fn from_slope(slope: f64) -> Regime {
    if slope > FLAT_SLOPE {
        Regime::ACentered
    } else if slope < -FLAT_SLOPE {
        Regime::CBias
    } else {
        Regime::BMixed
    }
}

/// Asymptotic regime for γ_n ∝ n^{-ξ}. The exponent of r_n is
/// ((2q+1)ξ − 1)/2 while Σγ^{q+1} diverges, so ξ = 1/(2q+1) is the mixed case;
/// the same band as the numeric slope is used to absorb finite-precision ξ.
pub fn analytic_regime(xi: f64, q: usize) -> Regime {
    let q = q as f64;
    if (q + 1.0) * xi >= 1.0 {
        return Regime::ACentered;
    }
    from_slope(((2.0 * q + 1.0) * xi - 1.0) / 2.0)
}

/// r_n = √Γ_n / Σ_{k≤n} γ_k^{q+1} for one n.
pub fn finite_l_hat(step: &StepSchedule, q: usize, n: u64) -> f64 {
    let (g, h) = sums(step, q, &[n]);
    g[0].sqrt() / h[0]
}

fn sums(step: &StepSchedule, q: usize, at: &[u64]) -> (Vec<f64>, Vec<f64>) {
    let mut big_gamma = CompensatedSum::new();
    let mut big_h = CompensatedSum::new();
    let mut out = (Vec::with_capacity(at.len()), Vec::with_capacity(at.len()));
    let last = at.iter().copied().max().unwrap_or(0);
    let mut next = 0;
    let power = (q + 1) as i32;
    for k in 1..=last {
        let g = step.term(k);
        big_gamma.add(g);
        big_h.add(g.powi(power));
        while next < at.len() && at[next] == k {
            out.0.push(big_gamma.value());
            out.1.push(big_h.value());
            next += 1;
        }
    }
    out
}

/// Classifies the regime from the slope of r_n over [n_max/10, n_max] with
/// n_max raised to at least [`MIN_HORIZON`], and checks it against
/// [`analytic_regime`].
pub fn classify_regime(step: &StepSchedule, q: usize, n_max: u64) -> Result<RegimeClassification> {
    if step.kind() != StepKind::PowerLaw {
        return Err(Error::InvalidParameter(
            "regime classification needs power-law steps".into(),
        ));
    }
    if q == 0 {
        return Err(Error::InvalidParameter("scheme order must be >= 1".into()));
    }
    let xi = step.xi().unwrap_or(0.0);
    let horizon = n_max.max(MIN_HORIZON);
    let (g, h) = sums(step, q, &[horizon / 10, horizon]);
    let r0 = g[0].sqrt() / h[0];
    let r1 = g[1].sqrt() / h[1];
    let slope = (r1 / r0).ln() / 10f64.ln();
    let regime = from_slope(slope);
    let analytic = analytic_regime(xi, q);
    if regime != analytic {
        return Err(Error::RegimeInconsistency {
            numeric: format!("{regime} (slope {slope:.4})"),
            analytic: format!("{analytic} (xi = {xi}, q = {q})"),
        });
    }
    Ok(RegimeClassification {
        regime,
        analytic,
        slope,
        horizon,
        r_final: r1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(xi: f64, q: usize) -> Regime {
        let s = StepSchedule::power_law(1.0, xi).unwrap();
        classify_regime(&s, q, 0).unwrap().regime
    }

    #[test]
    fn examples() {
        assert_eq!(classify(1.0 / 3.0, 1), Regime::BMixed);
        assert_eq!(classify(1.0 / 3.0, 2), Regime::ACentered);
        assert_eq!(classify(0.2, 2), Regime::BMixed);
        assert_eq!(classify(0.1, 1), Regime::CBias);
    }

    #[test]
    fn l_hat_for_euler_cube_root_steps() {
        // √(3/2 n^{2/3}) / (3 n^{1/3}) → √1.5 / 3
        let s = StepSchedule::power_law(1.0, 1.0 / 3.0).unwrap();
        let c = classify_regime(&s, 1, 0).unwrap();
        assert!((c.r_final - 1.5f64.sqrt() / 3.0).abs() < 0.01, "{}", c.r_final);
    }

    #[test]
    fn constant_steps_rejected() {
        let s = StepSchedule::constant(0.1).unwrap();
        assert!(classify_regime(&s, 1, 10).is_err());
    }
}
