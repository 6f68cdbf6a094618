//! Lyapunov stability probes: the one-step recursive control, the continuous-time
//! mean-reversion inequality and the growth control of V.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{ProbeReport, Verdict};
use crate::error::{Error, Result};
use crate::model::lyapunov::LyapunovSpec;
use crate::model::operators::expect_over;
use crate::model::{Diffusion, Quadrature};
use crate::schemes::{InnovationDist, Scheme, Stepper};

fn check_grid(grid: &[Vec<f64>], d: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("probe grid is empty".into()));
    }
    if let Some(x) = grid.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}

fn check_lyapunov(model: &dyn Diffusion, lyap: &LyapunovSpec) -> Result<()> {
    if lyap.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: lyap.dim(),
        });
    }
    Ok(())
}

fn base_metadata(lyap: &LyapunovSpec) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("p".into(), json!(lyap.p));
    m.insert("a".into(), json!(lyap.a));
    m.insert("alpha".into(), json!(lyap.alpha));
    m.insert("beta".into(), json!(lyap.beta));
    m.insert("v_star".into(), json!(lyap.v_star));
    m
}

/// margin(x) = ψ_p(V)/V · p(β − αφ(V)) − Ã_γ(ψ_p∘V)(x), with
/// Ã_γ g(x) = (E g(X̄_γ) − g(x))/γ for one scheme step from x.
///
/// A point passes when margin ≥ −max(1e-8, 0.02 · ψ_p(V)/V · p(|β| + αφ(V))).
/// Under Monte Carlo the verdict is inconclusive when SE/γ exceeds a tenth of
/// that same scale at some point.
#[allow(clippy::too_many_arguments)]
pub fn recursive_control_probe(
    scheme: Scheme,
    model: &dyn Diffusion,
    lyap: &LyapunovSpec,
    gamma: f64,
    grid: &[Vec<f64>],
    dist: InnovationDist,
    quad: Quadrature,
) -> Result<ProbeReport> {
    check_lyapunov(model, lyap)?;
    check_grid(grid, model.dim())?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive (got {gamma})")));
    }
    let (d, n_w) = (model.dim(), model.noise_dim());
    let with_kappa = scheme == Scheme::Talay2 && n_w > 1 && !model.constant_diffusion();
    let rows: Vec<(f64, f64, f64, f64)> = grid
        .par_iter()
        .map(|x| -> Result<(f64, f64, f64, f64)> {
            let v = lyap.checked_v(x)?;
            let psi_v = lyap.psi(v);
            let mut stepper = Stepper::new(scheme, dist, d, n_w);
            let mut y = vec![0.0; d];
            let est = expect_over(dist, n_w, with_kappa, quad, |u, w| {
                y.copy_from_slice(x);
                stepper.step_with(model, &mut y, gamma, u, Some(w))?;
                Ok(lyap.psi(lyap.v(&y)))
            })?;
            let a_tilde = (est.value - psi_v) / gamma;
            let lead = psi_v / v * lyap.p;
            let phi = lyap.phi(v);
            let rhs = lead * (lyap.beta - lyap.alpha * phi);
            let scale = lead * (lyap.beta.abs() + lyap.alpha * phi);
            Ok((rhs - a_tilde, (0.02 * scale).max(1e-8), est.std_error / gamma, scale))
        })
        .collect::<Result<_>>()?;
    let inconclusive = rows.iter().any(|r| r.2 > 0.1 * r.3);
    let mut meta = base_metadata(lyap);
    meta.insert("gamma".into(), json!(gamma));
    meta.insert("scheme".into(), json!(scheme.name()));
    meta.insert("innovation".into(), json!(dist.name()));
    meta.insert(
        "quadrature".into(),
        json!(match quad {
            Quadrature::Enumerate => "enumerate".to_string(),
            Quadrature::MonteCarlo { samples, seed } => format!("monte_carlo({samples}, seed {seed})"),
        }),
    );
    Ok(ProbeReport::assemble(
        grid.to_vec(),
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
        inconclusive,
        meta,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlScan {
    /// (γ, verdict, worst margin) in the order probed.
    pub entries: Vec<(f64, Verdict, f64)>,
    pub smallest_passing_gamma: Option<f64>,
    /// Largest probed γ such that every probed γ' ≤ γ passes.
    pub passing_threshold: Option<f64>,
}

/// Runs [`recursive_control_probe`] over several steps.
#[allow(clippy::too_many_arguments)]
pub fn recursive_control_scan(
    scheme: Scheme,
    model: &dyn Diffusion,
    lyap: &LyapunovSpec,
    gammas: &[f64],
    grid: &[Vec<f64>],
    dist: InnovationDist,
    quad: Quadrature,
) -> Result<ControlScan> {
    let mut entries = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let r = recursive_control_probe(scheme, model, lyap, g, grid, dist, quad)?;
        entries.push((g, r.verdict, r.worst_margin));
    }
    let passing = |e: &&(f64, Verdict, f64)| e.1 == Verdict::Pass;
    let smallest_passing_gamma = entries
        .iter()
        .filter(passing)
        .map(|e| e.0)
        .min_by(f64::total_cmp);
    let mut sorted: Vec<_> = entries.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let passing_threshold = sorted
        .iter()
        .take_while(|e| e.1 == Verdict::Pass)
        .last()
        .map(|e| e.0);
    Ok(ControlScan {
        entries,
        smallest_passing_gamma,
        passing_threshold,
    })
}

/// Largest eigenvalue of D²V + 2(p − 1)∇V∇Vᵀ/V (p = 1 gives D²V).
fn lambda(lyap: &LyapunovSpec, x: &[f64], p: f64) -> f64 {
    let d = x.len();
    let v = lyap.v(x);
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    lyap.grad_v(x, &mut g);
    lyap.hess_v(x, &mut h);
    let c = 2.0 * (p - 1.0) / v;
    let m = DMatrix::from_fn(d, d, |i, j| {
        0.5 * (h[i * d + j] + h[j * d + i]) + c * g[i] * g[j]
    });
    SymmetricEigen::new(m).eigenvalues.max()
}

/// margin(x) = β − αφ(V(x)) − ⟨∇V(x), b(x)⟩ − ½χ_p(x), where
/// χ_p = ‖λ‖ Tr σσ*(x) for p ≤ 1 and ‖λ_p‖ 2^{(2p−3)+} Tr σσ*(x) for p > 1.
///
/// The sup norm ‖λ‖ is replaced by the maximum of |λ| over the grid; the
/// metadata records this.
pub fn mean_reversion_probe(
    model: &dyn Diffusion,
    lyap: &LyapunovSpec,
    grid: &[Vec<f64>],
) -> Result<ProbeReport> {
    check_lyapunov(model, lyap)?;
    check_grid(grid, model.dim())?;
    let p_eff = if lyap.p <= 1.0 { 1.0 } else { lyap.p };
    let lam_norm = grid
        .par_iter()
        .map(|x| lambda(lyap, x, p_eff).abs())
        .reduce(|| 0.0, f64::max);
    let factor = if lyap.p > 1.0 {
        2f64.powf((2.0 * lyap.p - 3.0).max(0.0))
    } else {
        1.0
    };
    let (d, n_w) = (model.dim(), model.noise_dim());
    let rows: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|x| -> Result<(f64, f64)> {
            let v = lyap.checked_v(x)?;
            let mut g = vec![0.0; d];
            let mut b = vec![0.0; d];
            let mut sigma = vec![0.0; d * n_w];
            lyap.grad_v(x, &mut g);
            model.drift(x, &mut b);
            model.diffusion(x, &mut sigma);
            let drift: f64 = g.iter().zip(&b).map(|(a, c)| a * c).sum();
            let trace: f64 = sigma.iter().map(|s| s * s).sum();
            let chi = lam_norm * factor * trace;
            let phi = lyap.alpha * lyap.phi(v);
            let margin = lyap.beta - phi - drift - 0.5 * chi;
            let scale = lyap.beta.abs() + phi + drift.abs() + 0.5 * chi;
            Ok((margin, (1e-10 * scale).max(1e-8)))
        })
        .collect::<Result<_>>()?;
    let mut meta = base_metadata(lyap);
    meta.insert("lambda_sup".into(), json!(lam_norm));
    meta.insert(
        "lambda_sup_source".into(),
        json!("grid maximum of the largest eigenvalue, not a proven supremum"),
    );
    Ok(ProbeReport::assemble(
        grid.to_vec(),
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        vec![0.0; rows.len()],
        false,
        meta,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovControlReport {
    /// max over the grid of |∇V|²/V.
    pub c_v: f64,
    /// max over the grid of the spectral norm of D²V.
    pub hessian_bound: f64,
    /// Point attaining `c_v`.
    pub worst_point: Vec<f64>,
    pub grid_points: usize,
}

/// Grid estimates of the constants in |∇V|² ≤ C_V V and sup ‖D²V‖ < ∞.
pub fn lyapunov_control_probe(
    lyap: &LyapunovSpec,
    grid: &[Vec<f64>],
) -> Result<LyapunovControlReport> {
    let d = lyap.dim();
    check_grid(grid, d)?;
    let mut c_v = 0.0;
    let mut worst = grid[0].clone();
    let mut hessian_bound: f64 = 0.0;
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    for x in grid {
        let v = lyap.checked_v(x)?;
        lyap.grad_v(x, &mut g);
        let ratio = g.iter().map(|t| t * t).sum::<f64>() / v;
        if ratio > c_v {
            c_v = ratio;
            worst = x.clone();
        }
        lyap.hess_v(x, &mut h);
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (h[i * d + j] + h[j * d + i]));
        let eig = SymmetricEigen::new(m).eigenvalues;
        hessian_bound = hessian_bound.max(eig.amax());
    }
    Ok(LyapunovControlReport {
        c_v,
        hessian_bound,
        worst_point: worst,
        grid_points: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::default_grid;
    use super::*;
    use crate::model::{DiffusionModel, Ou1d};

    fn ou() -> Ou1d {
        Ou1d::new(1.0, 2f64.sqrt()).unwrap()
    }

    #[test]
    fn ou_euler_margin_is_minus_gamma_x_squared() {
        // Ã_γ V = −2x² + 2 + γx² for Euler, so margin = −γx².
        let lyap = LyapunovSpec::quadratic(1, 1.0, 1.0, 2.0, 4.0).unwrap();
        let grid = default_grid(1);
        let gamma = 0.01;
        let r = recursive_control_probe(
            Scheme::Euler,
            &ou(),
            &lyap,
            gamma,
            &grid,
            InnovationDist::Rademacher,
            Quadrature::Enumerate,
        )
        .unwrap();
        for (x, m) in r.grid.iter().zip(&r.margins) {
            let want = -gamma * x[0] * x[0];
            assert!((m - want).abs() < 1e-9, "x={x:?} m={m} want={want}");
        }
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn frozen_dynamics_margin_equals_rhs() {
        let model = DiffusionModel::new(
            1,
            1,
            |_: &[f64], b: &mut [f64]| b[0] = 0.0,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
        );
        let lyap = LyapunovSpec::quadratic(1, 1.0, 1.0, 2.0, 4.0).unwrap();
        let grid = default_grid(1);
        let r = recursive_control_probe(
            Scheme::Talay2,
            &model,
            &lyap,
            0.1,
            &grid,
            InnovationDist::ThreePoint,
            Quadrature::Enumerate,
        )
        .unwrap();
        for (x, m) in r.grid.iter().zip(&r.margins) {
            let rhs = 4.0 - 2.0 * (1.0 + x[0] * x[0]);
            assert!((m - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_reversion_is_tight_on_ou() {
        let lyap = LyapunovSpec::quadratic(1, 1.0, 1.0, 2.0, 4.0).unwrap();
        let r = mean_reversion_probe(&ou(), &lyap, &default_grid(1)).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.margins.iter().all(|m| m.abs() < 1e-10));
        let loose = LyapunovSpec::quadratic(1, 1.0, 1.0, 3.0, 4.0).unwrap();
        let r = mean_reversion_probe(&ou(), &loose, &default_grid(1)).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn control_constants_for_quadratic_v() {
        let lyap = LyapunovSpec::quadratic(2, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = lyapunov_control_probe(&lyap, &default_grid(2)).unwrap();
        // 4|x|²/(1 + |x|²) is maximal at the corners |x|² = 50
        assert!((r.c_v - 200.0 / 51.0).abs() < 1e-12);
        assert!((r.hessian_bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_reports_threshold() {
        let lyap = LyapunovSpec::quadratic(1, 1.0, 1.0, 2.0, 4.0).unwrap();
        let grid = default_grid(1);
        let scan = recursive_control_scan(
            Scheme::Euler,
            &ou(),
            &lyap,
            &[0.001, 0.01, 0.5],
            &grid,
            InnovationDist::Rademacher,
            Quadrature::Enumerate,
        )
        .unwrap();
        assert_eq!(scan.smallest_passing_gamma, Some(0.001));
        assert_eq!(scan.passing_threshold, Some(0.01));
        assert_eq!(scan.entries[2].1, Verdict::Fail);
    }

    #[test]
    fn monte_carlo_noise_is_inconclusive() {
        let lyap = LyapunovSpec::quadratic(1, 1.0, 1.0, 2.0, 4.0).unwrap();
        let r = recursive_control_probe(
            Scheme::Euler,
            &ou(),
            &lyap,
            0.01,
            &default_grid(1),
            InnovationDist::Gaussian,
            Quadrature::MonteCarlo {
                samples: 100,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }
}
