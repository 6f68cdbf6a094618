//! One-step kernels and the trajectory driver.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::innovation::{rng_stream, InnovationDist, LevyAreaSurrogate};
use crate::error::{Error, Result};
use crate::model::operators::TalayCoefficients;
use crate::model::Diffusion;
use crate::schedules::{ScheduleRecord, WeightSchedule};

/// States with a coordinate beyond this magnitude count as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Talay2,
}

impl Scheme {
    /// Weak order q.
    pub fn order(self) -> usize {
        match self {
            Scheme::Euler => 1,
            Scheme::Talay2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Talay2 => "talay2",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "talay2" | "talay" => Ok(Scheme::Talay2),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

fn check_state(x: &[f64], step: u64) -> Result<()> {
    for &v in x {
        if !v.is_finite() || v.abs() > DIVERGENCE_BOUND {
            return Err(Error::Divergence {
                step,
                reason: format!("state coordinate {v}"),
            });
        }
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step size must be positive (got {gamma})")))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `x + γ b(x) + √γ σ(x) u`.
pub fn euler_step(model: &dyn Diffusion, x: &[f64], gamma: f64, u: &[f64]) -> Result<Vec<f64>> {
    check_len(model.dim(), x.len())?;
    check_len(model.noise_dim(), u.len())?;
    let mut s = Stepper::new(Scheme::Euler, InnovationDist::Gaussian, model.dim(), model.noise_dim());
    let mut y = x.to_vec();
    s.step_with(model, &mut y, gamma, u, None)?;
    Ok(y)
}

/// The five pieces of a Talay step:
/// Δ¹ = √γ σu, Δ² = γ b, Δ³ = γ ½Σ_{ij}(Dσ_i; σ_j)𝒲^{ij}, Δ⁴ = γ^{3/2} ½σ̃u, Δ⁵ = γ² ½Ab.
#[derive(Debug, Clone, PartialEq)]
pub struct TalayIncrements {
    pub delta: [Vec<f64>; 5],
}

impl TalayIncrements {
    pub fn total(&self) -> Vec<f64> {
        let d = self.delta[0].len();
        (0..d).map(|l| self.delta.iter().map(|v| v[l]).sum()).collect()
    }
}

pub fn talay_increments(
    model: &dyn Diffusion,
    x: &[f64],
    gamma: f64,
    u: &[f64],
    w: &LevyAreaSurrogate,
) -> Result<TalayIncrements> {
    check_gamma(gamma)?;
    check_len(model.dim(), x.len())?;
    check_len(model.noise_dim(), u.len())?;
    check_len(model.noise_dim(), w.dim())?;
    let d = model.dim();
    let mut c = TalayCoefficients::new(d, model.noise_dim());
    c.compute(model, x)?;
    let h = gamma.sqrt();
    let mut d1 = vec![0.0; d];
    c.sigma_u(u, &mut d1);
    d1.iter_mut().for_each(|v| *v *= h);
    let d2: Vec<f64> = c.b.iter().map(|v| gamma * v).collect();
    let mut d3 = vec![0.0; d];
    c.levy_term(w, &mut d3);
    d3.iter_mut().for_each(|v| *v *= gamma);
    let mut d4 = vec![0.0; d];
    c.s_u(u, &mut d4);
    d4.iter_mut().for_each(|v| *v *= gamma * h);
    let d5: Vec<f64> = c.ab.iter().map(|v| 0.5 * gamma * gamma * v).collect();
    Ok(TalayIncrements {
        delta: [d1, d2, d3, d4, d5],
    })
}

/// `x + Δ¹ + … + Δ⁵`.
pub fn talay_step(
    model: &dyn Diffusion,
    x: &[f64],
    gamma: f64,
    u: &[f64],
    w: &LevyAreaSurrogate,
) -> Result<Vec<f64>> {
    check_len(model.noise_dim(), w.dim())?;
    check_len(model.dim(), x.len())?;
    check_len(model.noise_dim(), u.len())?;
    let mut s = Stepper::new(Scheme::Talay2, InnovationDist::Gaussian, model.dim(), model.noise_dim());
    let mut y = x.to_vec();
    s.step_with(model, &mut y, gamma, u, Some(w))?;
    Ok(y)
}

/// Allocation-free stepper with its own buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    scheme: Scheme,
    dist: InnovationDist,
    u: Vec<f64>,
    w: LevyAreaSurrogate,
    buf: Buffers,
}

#[derive(Debug, Clone)]
struct Buffers {
    coeffs: TalayCoefficients,
    v1: Vec<f64>,
    v2: Vec<f64>,
    v3: Vec<f64>,
}

impl Stepper {
    pub fn new(scheme: Scheme, dist: InnovationDist, d: usize, n_w: usize) -> Self {
        Self {
            scheme,
            dist,
            u: vec![0.0; n_w],
            w: LevyAreaSurrogate::zeros(n_w),
            buf: Buffers {
                coeffs: TalayCoefficients::new(d, n_w),
                v1: vec![0.0; d],
                v2: vec![0.0; d],
                v3: vec![0.0; d],
            },
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Draws U (then κ^{ij}, i < j row-major, for Talay with N ≥ 2) and steps.
    #[inline]
    pub fn step<M: Diffusion + ?Sized, R: Rng + ?Sized>(
        &mut self,
        model: &M,
        x: &mut [f64],
        gamma: f64,
        rng: &mut R,
    ) -> Result<()> {
        self.dist.sample_into(rng, &mut self.u);
        if self.scheme == Scheme::Talay2 {
            self.w.resample(&self.u, rng);
        }
        self.buf.advance(self.scheme, model, x, gamma, &self.u, &self.w)
    }

    /// Steps with given draws; `w` is required for Talay.
    pub fn step_with<M: Diffusion + ?Sized>(
        &mut self,
        model: &M,
        x: &mut [f64],
        gamma: f64,
        u: &[f64],
        w: Option<&LevyAreaSurrogate>,
    ) -> Result<()> {
        match (self.scheme, w) {
            (Scheme::Euler, _) => {
                self.buf
                    .advance(Scheme::Euler, model, x, gamma, u, &LevyAreaSurrogate::zeros(0))
            }
            (Scheme::Talay2, Some(w)) => self.buf.advance(Scheme::Talay2, model, x, gamma, u, w),
            (Scheme::Talay2, None) => {
                Err(Error::InvalidParameter("Talay step needs a Levy-area surrogate".into()))
            }
        }
    }

}

impl Buffers {
    #[inline]
    fn advance<M: Diffusion + ?Sized>(
        &mut self,
        scheme: Scheme,
        model: &M,
        x: &mut [f64],
        gamma: f64,
        u: &[f64],
        w: &LevyAreaSurrogate,
    ) -> Result<()> {
        check_gamma(gamma)?;
        let h = gamma.sqrt();
        let c = &mut self.coeffs;
        match scheme {
            Scheme::Euler => {
                model.drift(x, &mut c.b);
                model.diffusion(x, &mut c.sigma);
                c.sigma_u(u, &mut self.v1);
                for l in 0..x.len() {
                    x[l] += gamma * c.b[l] + h * self.v1[l];
                }
            }
            Scheme::Talay2 => {
                c.compute(model, x)?;
                c.sigma_u(u, &mut self.v1);
                c.s_u(u, &mut self.v2);
                c.levy_term(w, &mut self.v3);
                let g32 = gamma * h;
                let g2 = 0.5 * gamma * gamma;
                for l in 0..x.len() {
                    x[l] += h * self.v1[l]
                        + gamma * (c.b[l] + self.v3[l])
                        + g32 * self.v2[l]
                        + g2 * c.ab[l];
                }
            }
        }
        check_state(x, 0)
    }
}

/// Consumer of pre-step states: called with X̄_{Γ_{k−1}} and the schedule at k.
pub trait StateSink {
    fn record(&mut self, rec: &ScheduleRecord, state: &[f64]) -> Result<()>;
}

/// Final state of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub x: Vec<f64>,
    pub n: u64,
    pub gamma_n: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Runs `n_steps` steps from `x0` on the stream (seed, replication), feeding each
/// pre-step state with its schedule record to every sink.
#[allow(clippy::too_many_arguments)]
pub fn simulate<M: Diffusion + ?Sized>(
    scheme: Scheme,
    model: &M,
    weights: &WeightSchedule,
    dist: InnovationDist,
    n_steps: u64,
    x0: &[f64],
    seed: u64,
    replication: u64,
    sinks: &mut [&mut dyn StateSink],
) -> Result<SchemeState> {
    check_len(model.dim(), x0.len())?;
    check_state(x0, 0)?;
    let mut rng = rng_stream(seed, replication);
    let mut stepper = Stepper::new(scheme, dist, model.dim(), model.noise_dim());
    let mut x = x0.to_vec();
    let mut gamma_n = 0.0;
    for rec in weights.cursor().take(n_steps as usize) {
        for sink in sinks.iter_mut() {
            sink.record(&rec, &x)?;
        }
        stepper
            .step(model, &mut x, rec.gamma, &mut rng)
            .map_err(|e| match e {
                Error::Divergence { reason, .. } => Error::Divergence {
                    step: rec.k,
                    reason,
                },
                other => other,
            })?;
        gamma_n = rec.gamma;
    }
    Ok(SchemeState {
        x,
        n: n_steps,
        gamma_n,
        seed,
        stream: replication,
    })
}
