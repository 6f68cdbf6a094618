//! Diffusions dX = b(X) dt + σ(X) dW, test functions, and the operators built on them.
//!
//! Tensor contractions (D^k f(x); v_1 ⊗ … ⊗ v_k) are never materialized: every
//! derivative is requested as a directional derivative along explicit vectors.
//! Diffusion matrices are stored row-major, `sigma[l * n_w + i] = σ_{l,i}`.

use std::sync::Arc;

use crate::error::{Error, Result};

pub mod catalog;
mod fd;
pub mod lyapunov;
pub mod observable;
pub mod operators;

pub use catalog::{DoubleWell, InvariantLaw, ModelSpec, Ou1d, OuNd};
pub use lyapunov::LyapunovSpec;
pub use observable::{FnObservable, GeneratorObservable, LinearCombination, Monomial};
pub use operators::{
    drift_generator, generator_apply, m1_euler, m1_talay, m2_talay, m2_tilde_talay, sigma_tilde,
    vf_operator, Estimate, Quadrature, TalayCoefficients,
};

/// Drift and diffusion coefficients together with their derivative oracles.
///
/// `drift_derivative` and `diffusion_derivative` return the k-th directional
/// derivative `(D^k b(x); v_1, …, v_k)` (resp. of σ) for `k = dirs.len()`. The
/// default implementations fall back to central finite differences for k ≤ 2 and
/// refuse higher orders.
pub trait Diffusion: Send + Sync {
    fn dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Row-major d × N matrix.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    /// Highest derivative order available in closed form (0 if none).
    fn analytic_order(&self) -> usize {
        0
    }

    /// True when σ does not depend on x; lets steppers skip Dσ terms.
    fn constant_diffusion(&self) -> bool {
        false
    }

    fn drift_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        fd::directional(|y, o| self.drift(y, o), x, dirs, out, "drift")
    }

    fn diffusion_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        fd::directional(|y, o| self.diffusion(y, o), x, dirs, out, "diffusion")
    }
}

impl<T: Diffusion + ?Sized> Diffusion for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (**self).drift(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (**self).diffusion(x, out)
    }
    fn analytic_order(&self) -> usize {
        (**self).analytic_order()
    }
    fn constant_diffusion(&self) -> bool {
        (**self).constant_diffusion()
    }
    fn drift_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        (**self).drift_derivative(x, dirs, out)
    }
    fn diffusion_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        (**self).diffusion_derivative(x, dirs, out)
    }
}

/// Real-valued test function with directional derivatives up to `max_order`.
pub trait Observable: Send + Sync {
    fn dim(&self) -> usize;

    fn max_order(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// `(D^k f(x); v_1 ⊗ … ⊗ v_k)` with `k = dirs.len()`; k = 0 is the value.
    fn dirderiv(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64>;
}

impl<T: Observable + ?Sized> Observable for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn max_order(&self) -> usize {
        (**self).max_order()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn dirderiv(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64> {
        (**self).dirderiv(x, dirs)
    }
}

pub(crate) fn require_order(obs: &dyn Observable, order: usize) -> Result<()> {
    if obs.max_order() < order {
        return Err(Error::InsufficientOrder {
            required: order,
            available: obs.max_order(),
        });
    }
    Ok(())
}

type VecFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type DerivFn = Box<dyn Fn(&[f64], &[&[f64]], &mut [f64]) + Send + Sync>;

/// What to do when a derivative above the analytic order is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeFallback {
    /// Refuse with [`Error::MissingDerivative`].
    Analytic,
    /// Central differences for orders 1 and 2. `h = None` uses the default
    /// scaled steps ε^{1/3}(1+|x|) and ε^{1/4}(1+|x|).
    CentralDifference { h: Option<f64> },
}

/// Closure-backed diffusion model.
pub struct DiffusionModel {
    d: usize,
    n_w: usize,
    drift: VecFn,
    sigma: VecFn,
    drift_deriv: Option<(usize, DerivFn)>,
    sigma_deriv: Option<(usize, DerivFn)>,
    fallback: DerivativeFallback,
    constant_sigma: bool,
}

impl std::fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("d", &self.d)
            .field("n_w", &self.n_w)
            .field("analytic_order", &self.analytic_order())
            .field("fallback", &self.fallback)
            .finish()
    }
}

impl DiffusionModel {
    pub fn new(
        d: usize,
        n_w: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        sigma: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            d,
            n_w,
            drift: Box::new(drift),
            sigma: Box::new(sigma),
            drift_deriv: None,
            sigma_deriv: None,
            fallback: DerivativeFallback::CentralDifference { h: None },
            constant_sigma: false,
        }
    }

    /// Closed-form `(D^k b; v…)` for 1 ≤ k ≤ `order`.
    pub fn with_drift_derivatives(
        mut self,
        order: usize,
        f: impl Fn(&[f64], &[&[f64]], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.drift_deriv = Some((order, Box::new(f)));
        self
    }

    /// Closed-form `(D^k σ; v…)` for 1 ≤ k ≤ `order` (row-major d × N output).
    pub fn with_diffusion_derivatives(
        mut self,
        order: usize,
        f: impl Fn(&[f64], &[&[f64]], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.sigma_deriv = Some((order, Box::new(f)));
        self
    }

    pub fn with_fallback(mut self, fallback: DerivativeFallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn with_constant_diffusion(mut self) -> Self {
        self.constant_sigma = true;
        self
    }

    fn dispatch(
        &self,
        analytic: &Option<(usize, DerivFn)>,
        value: &VecFn,
        x: &[f64],
        dirs: &[&[f64]],
        out: &mut [f64],
        what: &'static str,
    ) -> Result<()> {
        let k = dirs.len();
        if k == 0 {
            value(x, out);
            return Ok(());
        }
        if let Some((order, f)) = analytic {
            if k <= *order {
                f(x, dirs, out);
                return Ok(());
            }
        }
        match self.fallback {
            DerivativeFallback::Analytic => Err(Error::MissingDerivative { what, order: k }),
            DerivativeFallback::CentralDifference { h } => {
                fd::directional_with_step(|y, o| value(y, o), x, dirs, out, what, h)
            }
        }
    }
}

impl Diffusion for DiffusionModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn noise_dim(&self) -> usize {
        self.n_w
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.sigma)(x, out)
    }

    fn analytic_order(&self) -> usize {
        match (&self.drift_deriv, &self.sigma_deriv) {
            (Some((a, _)), Some((b, _))) => (*a).min(*b),
            _ => 0,
        }
    }

    fn constant_diffusion(&self) -> bool {
        self.constant_sigma
    }

    fn drift_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        self.dispatch(&self.drift_deriv, &self.drift, x, dirs, out, "drift")
    }

    fn diffusion_derivative(&self, x: &[f64], dirs: &[&[f64]], out: &mut [f64]) -> Result<()> {
        self.dispatch(&self.sigma_deriv, &self.sigma, x, dirs, out, "diffusion")
    }
}

/// Column `i` of a row-major d × N matrix.
pub(crate) fn column(m: &[f64], d: usize, n_w: usize, i: usize) -> Vec<f64> {
    (0..d).map(|l| m[l * n_w + i]).collect()
}

/// `m · u` for a row-major d × N matrix.
pub(crate) fn mat_vec(m: &[f64], d: usize, n_w: usize, u: &[f64], out: &mut [f64]) {
    for l in 0..d {
        let row = &m[l * n_w..(l + 1) * n_w];
        out[l] = row.iter().zip(u).map(|(a, b)| a * b).sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_model_dispatches_and_falls_back() {
        // b(x) = sin(x), σ = 1 + x²/2 in d = N = 1
        let m = DiffusionModel::new(
            1,
            1,
            |x, o| o[0] = x[0].sin(),
            |x, o| o[0] = 1.0 + 0.5 * x[0] * x[0],
        )
        .with_drift_derivatives(1, |x, dirs, o| o[0] = x[0].cos() * dirs[0][0]);
        let mut out = [0.0];
        m.drift_derivative(&[0.3], &[&[1.0]], &mut out).unwrap();
        assert_eq!(out[0], 0.3f64.cos());
        m.drift_derivative(&[0.3], &[&[1.0], &[1.0]], &mut out).unwrap();
        assert!((out[0] + 0.3f64.sin()).abs() < 1e-6);
        m.diffusion_derivative(&[0.3], &[&[2.0]], &mut out).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-8);
        assert!(m
            .drift_derivative(&[0.3], &[&[1.0], &[1.0], &[1.0]], &mut out)
            .is_err());
        // no diffusion derivatives given: analytic order 0
        assert_eq!(m.analytic_order(), 0);

        let strict = DiffusionModel::new(1, 1, |x, o| o[0] = -x[0], |_, o| o[0] = 1.0)
            .with_fallback(DerivativeFallback::Analytic);
        assert!(matches!(
            strict.drift_derivative(&[0.0], &[&[1.0]], &mut out),
            Err(Error::MissingDerivative { .. })
        ));
    }
}
