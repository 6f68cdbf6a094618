//! Pointwise numeric probes of the stability and consistency hypotheses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::schemes::rng_stream;

mod control;
mod moments;
mod weak_order;

pub use control::{
    lyapunov_control_probe, mean_reversion_probe, recursive_control_probe, recursive_control_scan,
    ControlScan, LyapunovControlReport,
};
pub use moments::{moment_match_report, MomentDeviation, MomentMatchReport};
pub use weak_order::{weak_order_probe, WeakOrderReport};

/// Seed of the random cloud used by [`default_grid`] in dimension > 2.
pub const GRID_SEED: u64 = 0x5eed_c10d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Monte Carlo noise too large to decide.
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub grid: Vec<Vec<f64>>,
    pub margins: Vec<f64>,
    pub tolerances: Vec<f64>,
    /// Monte Carlo standard errors of the margins (all 0 under enumeration).
    pub std_errors: Vec<f64>,
    pub verdict: Verdict,
    /// Grid point with the smallest margin relative to its tolerance.
    pub worst_point: Vec<f64>,
    pub worst_margin: f64,
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl ProbeReport {
    pub(crate) fn assemble(
        grid: Vec<Vec<f64>>,
        margins: Vec<f64>,
        tolerances: Vec<f64>,
        std_errors: Vec<f64>,
        inconclusive: bool,
        metadata: serde_json::Map<String, serde_json::Value>,
    ) -> Self {
        let worst = (0..margins.len())
            .min_by(|&i, &j| {
                (margins[i] + tolerances[i]).total_cmp(&(margins[j] + tolerances[j]))
            })
            .unwrap_or(0);
        let pass = margins.iter().zip(&tolerances).all(|(m, t)| *m >= -t);
        let verdict = if inconclusive {
            Verdict::Inconclusive
        } else if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            worst_point: grid.get(worst).cloned().unwrap_or_default(),
            worst_margin: margins.get(worst).copied().unwrap_or(f64::NAN),
            grid,
            margins,
            tolerances,
            std_errors,
            verdict,
            metadata,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Tensor grid over [−5, 5]^d with 21 points per axis for d ≤ 2, otherwise a
/// seeded uniform cloud of 200 points.
pub fn default_grid(d: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..21).map(|i| -5.0 + 0.5 * i as f64).collect();
    match d {
        0 => vec![Vec::new()],
        1 => axis.iter().map(|&x| vec![x]).collect(),
        2 => axis
            .iter()
            .flat_map(|&x| axis.iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => {
            let mut rng = rng_stream(GRID_SEED, d as u64);
            (0..200)
                .map(|_| (0..d).map(|_| rng.random_range(-5.0..=5.0)).collect())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let g = default_grid(1);
        assert_eq!(g.len(), 21);
        assert_eq!((g[0][0], g[10][0], g[20][0]), (-5.0, 0.0, 5.0));
        assert_eq!(default_grid(2).len(), 441);
        let c = default_grid(3);
        assert_eq!(c.len(), 200);
        assert!(c.iter().flatten().all(|v| v.abs() <= 5.0));
        assert_eq!(c, default_grid(3));
    }

    #[test]
    fn verdict_follows_tolerances() {
        let meta = serde_json::Map::new();
        let r = ProbeReport::assemble(
            vec![vec![0.0], vec![1.0]],
            vec![0.5, -0.1],
            vec![0.2, 0.2],
            vec![0.0, 0.0],
            false,
            meta.clone(),
        );
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.worst_point, vec![1.0]);
        let r = ProbeReport::assemble(
            vec![vec![0.0]],
            vec![-0.3],
            vec![0.2],
            vec![0.0],
            false,
            meta,
        );
        assert_eq!(r.verdict, Verdict::Fail);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["grid", "margins", "verdict", "worst_point"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["verdict"], "fail");
    }
}
