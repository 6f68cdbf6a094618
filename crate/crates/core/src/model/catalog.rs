//! Built-in models and their invariant laws.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::observable::MAX_ORDER;
use super::Diffusion;
use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite (got {v})")))
    }
}

/// dX = −θX dt + σ dW in dimension 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ou1d {
    pub theta: f64,
    pub sigma: f64,
}

impl Ou1d {
    pub fn new(theta: f64, sigma: f64) -> Result<Self> {
        positive("theta", theta)?;
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0 (got {sigma})")));
        }
        Ok(Self { theta, sigma })
    }

    /// N(0, σ²/(2θ)).
    pub fn invariant_law(&self) -> InvariantLaw {
        InvariantLaw::Gaussian {
            mean: vec![0.0],
            cov: vec![self.sigma * self.sigma / (2.0 * self.theta)],
        }
    }
}

impl Diffusion for Ou1d {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.theta * x[0];
    }
    #[inline]
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn analytic_order(&self) -> usize {
        MAX_ORDER
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
    fn drift_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        out[0] = match dirs.len() {
            0 => -self.theta * x[0],
            1 => -self.theta * dirs[0][0],
            _ => 0.0,
        };
        Ok(())
    }
    fn diffusion_derivative(&self, _x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        out[0] = if dirs.is_empty() { self.sigma } else { 0.0 };
        Ok(())
    }
}

/// Gradient flow of U(x) = x⁴/4 − x²/2: dX = (X − X³) dt + σ dW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWell {
    pub sigma: f64,
}

impl DoubleWell {
    pub fn new(sigma: f64) -> Result<Self> {
        Ok(Self {
            sigma: positive("sigma", sigma)?,
        })
    }

    /// Density ∝ exp(−2U/σ²), tabulated on a fine grid.
    pub fn invariant_law(&self) -> InvariantLaw {
        let s2 = self.sigma * self.sigma;
        let potential = |x: f64| x.powi(4) / 4.0 - x * x / 2.0;
        // e^{-2U/σ²} < 1e-300 well before |x| = reach
        let mut reach = 2.0;
        while 2.0 * potential(reach) / s2 < 700.0 {
            reach *= 1.25;
        }
        InvariantLaw::tabulated(-reach, reach, 20_001, |x| -2.0 * potential(x) / s2)
    }
}

impl Diffusion for DoubleWell {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] - x[0] * x[0] * x[0];
    }
    #[inline]
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn analytic_order(&self) -> usize {
        MAX_ORDER
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
    fn drift_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        let x = x[0];
        let v: f64 = dirs.iter().map(|d| d[0]).product();
        out[0] = match dirs.len() {
            0 => x - x * x * x,
            1 => (1.0 - 3.0 * x * x) * v,
            2 => -6.0 * x * v,
            3 => -6.0 * v,
            _ => 0.0,
        };
        Ok(())
    }
    fn diffusion_derivative(&self, _x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        out[0] = if dirs.is_empty() { self.sigma } else { 0.0 };
        Ok(())
    }
}

/// dX = −ΘX dt + Σ dW with Θ (d × d) and Σ (d × N), both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OuNd {
    d: usize,
    n_w: usize,
    theta: Vec<f64>,
    sigma: Vec<f64>,
}

impl OuNd {
    pub fn new(theta: Vec<Vec<f64>>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let d = theta.len();
        if d == 0 || theta.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("theta_matrix must be square and non-empty".into()));
        }
        if sigma.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: sigma.len(),
            });
        }
        let n_w = sigma[0].len();
        if n_w == 0 || sigma.iter().any(|r| r.len() != n_w) {
            return Err(Error::InvalidParameter("sigma_matrix rows must share a length >= 1".into()));
        }
        let theta: Vec<f64> = theta.into_iter().flatten().collect();
        let sigma: Vec<f64> = sigma.into_iter().flatten().collect();
        if theta.iter().chain(&sigma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        let eig = DMatrix::from_row_slice(d, d, &theta).complex_eigenvalues();
        if eig.iter().any(|z| z.re <= 0.0) {
            return Err(Error::InvalidParameter(
                "theta_matrix eigenvalues must have positive real part".into(),
            ));
        }
        Ok(Self { d, n_w, theta, sigma })
    }

    /// Stationary covariance C solving ΘC + CΘᵀ = ΣΣᵀ.
    pub fn stationary_covariance(&self) -> Result<Vec<f64>> {
        let d = self.d;
        let th = DMatrix::from_row_slice(d, d, &self.theta);
        let s = DMatrix::from_row_slice(d, self.n_w, &self.sigma);
        let q = &s * s.transpose();
        let eye = DMatrix::<f64>::identity(d, d);
        // vec(ΘC + CΘᵀ) = (I ⊗ Θ + Θ ⊗ I) vec(C) with column-major vec
        let lhs = eye.kronecker(&th) + th.kronecker(&eye);
        let rhs = DVector::from_column_slice(q.as_slice());
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidParameter("singular Lyapunov system".into()))?;
        let c = DMatrix::from_column_slice(d, d, sol.as_slice());
        let c = (&c + c.transpose()) * 0.5;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = c[(i, j)];
            }
        }
        Ok(out)
    }

    pub fn invariant_law(&self) -> Result<InvariantLaw> {
        Ok(InvariantLaw::Gaussian {
            mean: vec![0.0; self.d],
            cov: self.stationary_covariance()?,
        })
    }
}

impl Diffusion for OuNd {
    fn dim(&self) -> usize {
        self.d
    }
    fn noise_dim(&self) -> usize {
        self.n_w
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (l, o) in out.iter_mut().enumerate().take(self.d) {
            let row = &self.theta[l * self.d..(l + 1) * self.d];
            *o = -row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.sigma);
    }
    fn analytic_order(&self) -> usize {
        MAX_ORDER
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
    fn drift_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        match dirs.len() {
            0 => self.drift(x, out),
            1 => self.drift(dirs[0], out),
            _ => out.fill(0.0),
        }
        Ok(())
    }
    fn diffusion_derivative(&self, _x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        if dirs.is_empty() {
            out.copy_from_slice(&self.sigma);
        } else {
            out.fill(0.0);
        }
        Ok(())
    }
}

/// Invariant law of a catalog model, used for expectations and distances.
#[derive(Debug, Clone, PartialEq)]
pub enum InvariantLaw {
    /// Normal law; `cov` is row-major d × d.
    Gaussian { mean: Vec<f64>, cov: Vec<f64> },
    /// 1-d law with density tabulated on a uniform grid, normalized.
    Tabulated {
        grid: Vec<f64>,
        density: Vec<f64>,
        cdf: Vec<f64>,
    },
}

impl InvariantLaw {
    /// Density proportional to `exp(log_density)` on `[lo, hi]` with `points` nodes.
    pub fn tabulated(lo: f64, hi: f64, points: usize, log_density: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
        let logs: Vec<f64> = grid.iter().map(|&x| log_density(x)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut density: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mut cdf = vec![0.0; points];
        for i in 1..points {
            cdf[i] = cdf[i - 1] + 0.5 * h * (density[i - 1] + density[i]);
        }
        let z = cdf[points - 1];
        density.iter_mut().for_each(|p| *p /= z);
        cdf.iter_mut().for_each(|c| *c /= z);
        InvariantLaw::Tabulated { grid, density, cdf }
    }

    pub fn dim(&self) -> usize {
        match self {
            InvariantLaw::Gaussian { mean, .. } => mean.len(),
            InvariantLaw::Tabulated { .. } => 1,
        }
    }

    /// `ν(g)`: tensor Gauss–Hermite for Gaussian laws (d ≤ 4), trapezoid for tabulated.
    pub fn expect(&self, g: impl Fn(&[f64]) -> f64) -> Result<f64> {
        match self {
            InvariantLaw::Gaussian { mean, cov } => {
                let d = mean.len();
                let m = match d {
                    1 => 60,
                    2 => 30,
                    3 => 14,
                    4 => 8,
                    _ => return Err(Error::UnsupportedDimension(d)),
                };
                let gh = GaussHermite::new(m)?;
                let chol = DMatrix::from_row_slice(d, d, cov)
                    .cholesky()
                    .ok_or_else(|| {
                        Error::InvalidParameter("covariance not positive definite".into())
                    })?
                    .l();
                let mut idx = vec![0usize; d];
                let mut z = vec![0.0; d];
                let mut x = vec![0.0; d];
                let mut total = 0.0;
                loop {
                    let mut w = 1.0;
                    for (k, &i) in idx.iter().enumerate() {
                        z[k] = gh.nodes[i];
                        w *= gh.weights[i];
                    }
                    for r in 0..d {
                        x[r] = mean[r] + (0..=r).map(|c| chol[(r, c)] * z[c]).sum::<f64>();
                    }
                    total += w * g(&x);
                    let mut k = 0;
                    loop {
                        if k == d {
                            return Ok(total);
                        }
                        idx[k] += 1;
                        if idx[k] < m {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                }
            }
            InvariantLaw::Tabulated { grid, density, .. } => {
                let h = grid[1] - grid[0];
                let n = grid.len();
                let mut total = 0.0;
                for i in 0..n {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    total += w * density[i] * g(&[grid[i]]);
                }
                Ok(total * h)
            }
        }
    }
}

/// Catalog entry addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Ou1d { theta: f64, sigma: f64 },
    DoubleWell { sigma: f64 },
    OuNd { theta: Vec<Vec<f64>>, sigma: Vec<Vec<f64>> },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ou1d { .. } => "ou1d",
            ModelSpec::DoubleWell { .. } => "double_well",
            ModelSpec::OuNd { .. } => "ou_nd",
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Diffusion>> {
        Ok(match self {
            ModelSpec::Ou1d { theta, sigma } => Arc::new(Ou1d::new(*theta, *sigma)?),
            ModelSpec::DoubleWell { sigma } => Arc::new(DoubleWell::new(*sigma)?),
            ModelSpec::OuNd { theta, sigma } => Arc::new(OuNd::new(theta.clone(), sigma.clone())?),
        })
    }

    /// Closed-form (or tabulated) invariant law; None when the law is degenerate.
    pub fn invariant_law(&self) -> Result<Option<InvariantLaw>> {
        Ok(match self {
            ModelSpec::Ou1d { theta, sigma } => {
                let m = Ou1d::new(*theta, *sigma)?;
                (m.sigma > 0.0).then(|| m.invariant_law())
            }
            ModelSpec::DoubleWell { sigma } => Some(DoubleWell::new(*sigma)?.invariant_law()),
            ModelSpec::OuNd { theta, sigma } => {
                let m = OuNd::new(theta.clone(), sigma.clone())?;
                m.invariant_law().ok().filter(|law| law.expect(|_| 1.0).is_ok())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_nd_covariance_solves_lyapunov() {
        let m = OuNd::new(
            vec![vec![2.0, 0.5], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.3, 1.2]],
        )
        .unwrap();
        let c = m.stationary_covariance().unwrap();
        let th = [2.0, 0.5, 0.0, 1.0];
        let q = [1.0, 0.3, 0.3, 0.09 + 1.44];
        for i in 0..2 {
            for j in 0..2 {
                let mut lhs = 0.0;
                for k in 0..2 {
                    lhs += th[i * 2 + k] * c[k * 2 + j] + c[i * 2 + k] * th[j * 2 + k];
                }
                assert!((lhs - q[i * 2 + j]).abs() < 1e-12);
            }
        }
        assert!(OuNd::new(vec![vec![-1.0]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn ou1d_law_moments() {
        let law = Ou1d::new(1.0, 2f64.sqrt()).unwrap().invariant_law();
        assert!((law.expect(|x| x[0] * x[0]).unwrap() - 1.0).abs() < 1e-13);
        assert!((law.expect(|x| x[0].powi(4)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_expectation_in_two_dimensions() {
        let law = InvariantLaw::Gaussian {
            mean: vec![1.0, -1.0],
            cov: vec![2.0, 0.5, 0.5, 1.0],
        };
        let e = law.expect(|x| x[0] * x[1]).unwrap();
        assert!((e - (0.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn double_well_law_is_symmetric_and_normalized() {
        let law = DoubleWell::new(1.0).unwrap().invariant_law();
        assert!((law.expect(|_| 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(law.expect(|x| x[0]).unwrap().abs() < 1e-10);
        // stationarity: ν(Af) = 0 for f = x², Af = 2x(x − x³) + σ²
        let af = law.expect(|x| 2.0 * x[0] * (x[0] - x[0].powi(3)) + 1.0).unwrap();
        assert!(af.abs() < 1e-8);
    }
}
