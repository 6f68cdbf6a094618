//! One-dimensional reference laws for distance computations.

use std::fmt;
use std::sync::Arc;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::InvariantLaw;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A law on ℝ given by its CDF and quantile function.
///
/// When the partial expectation `G(x) = E[(x − X)+] = ∫_{−∞}^x F` and the mean
/// are supplied, Wasserstein distances to step functions are computed in closed
/// form; otherwise they fall back to adaptive quadrature.
#[derive(Clone)]
pub struct AnalyticLaw1D {
    cdf: ScalarFn,
    quantile: ScalarFn,
    partial: Option<(ScalarFn, f64)>,
    moments: Option<Vec<f64>>,
}

impl fmt::Debug for AnalyticLaw1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticLaw1D")
            .field("closed_form_partial", &self.partial.is_some())
            .field("moments", &self.moments)
            .finish()
    }
}

impl AnalyticLaw1D {
    pub fn new(
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            cdf: Arc::new(cdf),
            quantile: Arc::new(quantile),
            partial: None,
            moments: None,
        }
    }

    /// Supplies `G(x) = E[(x − X)+]` and the mean.
    pub fn with_partial_expectation(
        mut self,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        mean: f64,
    ) -> Self {
        self.partial = Some((Arc::new(g), mean));
        self
    }

    /// Raw moments E[X^k], k = 1, 2, …
    pub fn with_moments(mut self, moments: Vec<f64>) -> Self {
        self.moments = Some(moments);
        self
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let n = Normal::new(mean, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let (n1, n2) = (n, n);
        let unit = Normal::standard();
        let mut moments = Vec::with_capacity(6);
        // E[X^k] through the recurrence m_k = μ m_{k−1} + (k−1)σ² m_{k−2}
        let (mut prev, mut cur) = (1.0, mean);
        moments.push(cur);
        for k in 2..=6 {
            let next = mean * cur + (k - 1) as f64 * sd * sd * prev;
            prev = cur;
            cur = next;
            moments.push(cur);
        }
        Ok(Self::new(move |x| n1.cdf(x), move |p| n2.inverse_cdf(p))
            .with_partial_expectation(
                move |x| {
                    let z = (x - mean) / sd;
                    (x - mean) * unit.cdf(z) + sd * unit.pdf(z)
                },
                mean,
            )
            .with_moments(moments))
    }

    /// One-dimensional invariant law of a catalog model.
    pub fn from_invariant(law: &InvariantLaw) -> Result<Self> {
        match law {
            InvariantLaw::Gaussian { mean, cov } if mean.len() == 1 => {
                Self::normal(mean[0], cov[0].sqrt())
            }
            InvariantLaw::Gaussian { mean, .. } => Err(Error::UnsupportedDimension(mean.len())),
            InvariantLaw::Tabulated { grid, cdf, .. } => Ok(Self::tabulated(grid, cdf)),
        }
    }

    /// Piecewise-linear CDF on `grid`, with matching quantile and partial expectation.
    pub fn tabulated(grid: &[f64], cdf: &[f64]) -> Self {
        let grid: Arc<[f64]> = grid.into();
        let cdf: Arc<[f64]> = cdf.into();
        let mut partial = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            partial[i] = partial[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (cdf[i - 1] + cdf[i]);
        }
        let last = grid.len() - 1;
        // E[(x − X)+] − E[(X − x)+] = x − mean at the right end where F = 1
        let mean = grid[last] - partial[last];
        let partial: Arc<[f64]> = partial.into();
        let (g1, c1) = (grid.clone(), cdf.clone());
        let (g2, c2) = (grid.clone(), cdf.clone());
        Self::new(
            move |x| interpolate(&g1, &c1, x, 0.0, 1.0),
            move |p| invert(&g2, &c2, p),
        )
        .with_partial_expectation(
            move |x| {
                if x <= grid[0] {
                    0.0
                } else if x >= grid[last] {
                    partial[last] + (x - grid[last])
                } else {
                    // exact integral of the linear CDF piece
                    let i = grid.partition_point(|&g| g <= x) - 1;
                    let fx = interpolate(&grid, &cdf, x, 0.0, 1.0);
                    partial[i] + 0.5 * (x - grid[i]) * (cdf[i] + fx)
                }
            },
            mean,
        )
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.quantile)(p)
    }

    pub fn moments(&self) -> Option<&[f64]> {
        self.moments.as_deref()
    }

    pub(crate) fn partial(&self) -> Option<(&ScalarFn, f64)> {
        self.partial.as_ref().map(|(g, m)| (g, *m))
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64, below: f64, above: f64) -> f64 {
    let last = grid.len() - 1;
    if x <= grid[0] {
        return below;
    }
    if x >= grid[last] {
        return above;
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + t * (values[i + 1] - values[i])
}

fn invert(grid: &[f64], cdf: &[f64], p: f64) -> f64 {
    let last = grid.len() - 1;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let i = cdf.partition_point(|&c| c < p).clamp(1, last);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    if c1 <= c0 {
        return grid[i];
    }
    grid[i - 1] + (p - c0) / (c1 - c0) * (grid[i] - grid[i - 1])
}
