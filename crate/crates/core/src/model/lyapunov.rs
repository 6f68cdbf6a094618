//! Lyapunov data V, ψ_p(y) = y^p, φ(y) = y^a and the constants α, β.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct LyapunovSpec {
    dim: usize,
    v: ScalarField,
    grad_v: VectorField,
    hess_v: VectorField,
    pub v_star: f64,
    /// Exponent p of ψ_p.
    pub p: f64,
    /// Exponent a of φ.
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("dim", &self.dim)
            .field("v_star", &self.v_star)
            .field("p", &self.p)
            .field("a", &self.a)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .finish()
    }
}

impl LyapunovSpec {
    /// `hess_v` writes D²V row-major (d × d).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad_v: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hess_v: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        v_star: f64,
        p: f64,
        a: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(v_star > 0.0) {
            return Err(Error::InvalidParameter(format!("v_star must be positive (got {v_star})")));
        }
        if !(p > 0.0) {
            return Err(Error::InvalidParameter(format!("psi exponent must be positive (got {p})")));
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!("phi exponent must lie in (0, 1] (got {a})")));
        }
        if !(alpha > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need alpha > 0 and finite beta (got {alpha}, {beta})"
            )));
        }
        Ok(Self {
            dim,
            v: Arc::new(v),
            grad_v: Arc::new(grad_v),
            hess_v: Arc::new(hess_v),
            v_star,
            p,
            a,
            alpha,
            beta,
        })
    }

    /// V(x) = 1 + |x|² with v_* = 1.
    pub fn quadratic(dim: usize, p: f64, a: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            dim,
            |x| 1.0 + x.iter().map(|v| v * v).sum::<f64>(),
            |x, g| {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = 2.0 * xi;
                }
            },
            move |_, h| {
                h.fill(0.0);
                for i in 0..dim {
                    h[i * dim + i] = 2.0;
                }
            },
            1.0,
            p,
            a,
            alpha,
            beta,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        (self.v)(x)
    }

    pub fn grad_v(&self, x: &[f64], out: &mut [f64]) {
        (self.grad_v)(x, out)
    }

    pub fn hess_v(&self, x: &[f64], out: &mut [f64]) {
        (self.hess_v)(x, out)
    }

    pub fn psi(&self, y: f64) -> f64 {
        y.powf(self.p)
    }

    pub fn phi(&self, y: f64) -> f64 {
        y.powf(self.a)
    }

    /// V(x), rejecting points where V < v_*.
    pub fn checked_v(&self, x: &[f64]) -> Result<f64> {
        let v = self.v(x);
        if !(v >= self.v_star) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "V(x) = {v} below v_star = {} at {x:?}",
                self.v_star
            )));
        }
        Ok(v)
    }
}
