//! The generator A, the variance density 𝔙, the Talay fields σ̃ and Ab, and the
//! correction operators 𝔐₁ (Euler, Talay), 𝔐̃₂ and 𝔐₂ (Talay).
//!
//! The correction operators are expansion coefficients of one scheme step. With
//! h = √γ the Talay increment is Δ(h) = h·σu + h²·e + h³·s u + h⁴·a where
//! e = b + ½Σ_{ij}(Dσ_i; σ_j)𝒲^{ij}, s = ½σ̃ and a = ½Ab; collecting powers of h
//! in f(x + Δ(h)) gives E f(X̄_γ) = f + γAf + γ²C₂f + γ³C₃f + O(γ⁴) for the
//! Talay step. Then 𝔐₁ = −C₂, 𝔐̃₂ = C₃ and 𝔐₂f = −½𝔐₁(Af) − 𝔐̃₂f.

use std::sync::Arc;

use super::observable::GeneratorObservable;
use super::{column, mat_vec, require_order, Diffusion, Observable};
use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;
use crate::schemes::innovation::{
    enumerate_atoms, enumerate_outcomes, rng_stream, InnovationDist, LevyAreaSurrogate,
};

fn check_dims(model: &dyn Diffusion, f: &dyn Observable, x: &[f64]) -> Result<()> {
    if f.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: f.dim(),
        });
    }
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `Af(x) = Df[b] + ½ Σ_m D²f[σ_m, σ_m]`.
pub fn generator_apply(model: &dyn Diffusion, f: &dyn Observable, x: &[f64]) -> Result<f64> {
    check_dims(model, f, x)?;
    require_order(f, 2)?;
    let (d, n_w) = (model.dim(), model.noise_dim());
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * n_w];
    model.drift(x, &mut b);
    model.diffusion(x, &mut sigma);
    let mut total = f.dirderiv(x, &[&b])?;
    for m in 0..n_w {
        let col = column(&sigma, d, n_w, m);
        total += 0.5 * f.dirderiv(x, &[&col, &col])?;
    }
    Ok(total)
}

/// `𝔙f(x) = |σ(x)* ∇f(x)|² = Σ_i Df[σ_i]²`.
pub fn vf_operator(model: &dyn Diffusion, f: &dyn Observable, x: &[f64]) -> Result<f64> {
    check_dims(model, f, x)?;
    require_order(f, 1)?;
    let (d, n_w) = (model.dim(), model.noise_dim());
    let mut sigma = vec![0.0; d * n_w];
    model.diffusion(x, &mut sigma);
    let mut total = 0.0;
    for i in 0..n_w {
        let g = f.dirderiv(x, &[&column(&sigma, d, n_w, i)])?;
        total += g * g;
    }
    Ok(total)
}

/// σ̃_i = Db[σ_i] + Dσ_i[b] + Σ_m D²σ_i[σ_m, σ_m], row-major d × N.
pub fn sigma_tilde(model: &dyn Diffusion, x: &[f64]) -> Result<Vec<f64>> {
    let mut c = TalayCoefficients::new(model.dim(), model.noise_dim());
    c.compute(model, x)?;
    Ok(c.sigma_tilde)
}

/// `Ab = Db[b] + ½ Σ_m D²b[σ_m, σ_m]`, componentwise generator applied to b.
pub fn drift_generator(model: &dyn Diffusion, x: &[f64]) -> Result<Vec<f64>> {
    let mut c = TalayCoefficients::new(model.dim(), model.noise_dim());
    c.compute(model, x)?;
    Ok(c.ab)
}

/// Coefficient fields of the Talay step at one point, reusable across points.
#[derive(Debug, Clone)]
pub struct TalayCoefficients {
    pub d: usize,
    pub n_w: usize,
    pub b: Vec<f64>,
    /// Row-major d × N.
    pub sigma: Vec<f64>,
    pub sigma_cols: Vec<Vec<f64>>,
    /// Row-major d × N.
    pub sigma_tilde: Vec<f64>,
    pub ab: Vec<f64>,
    /// `Dσ_i[σ_j]` at index `i * N + j`; empty vectors when σ is constant.
    pub dsigma_sigma: Vec<Vec<f64>>,
    constant_sigma: bool,
    tmp: Vec<f64>,
    tmp_m: Vec<f64>,
}

impl TalayCoefficients {
    pub fn new(d: usize, n_w: usize) -> Self {
        Self {
            d,
            n_w,
            b: vec![0.0; d],
            sigma: vec![0.0; d * n_w],
            sigma_cols: vec![vec![0.0; d]; n_w],
            sigma_tilde: vec![0.0; d * n_w],
            ab: vec![0.0; d],
            dsigma_sigma: vec![vec![0.0; d]; n_w * n_w],
            constant_sigma: false,
            tmp: vec![0.0; d],
            tmp_m: vec![0.0; d * n_w],
        }
    }

    pub fn compute<M: Diffusion + ?Sized>(&mut self, model: &M, x: &[f64]) -> Result<()> {
        let (d, n_w) = (self.d, self.n_w);
        model.drift(x, &mut self.b);
        model.diffusion(x, &mut self.sigma);
        for (i, col) in self.sigma_cols.iter_mut().enumerate() {
            for (l, c) in col.iter_mut().enumerate() {
                *c = self.sigma[l * n_w + i];
            }
        }

        model.drift_derivative(x, &[&self.b], &mut self.ab)?;
        for m in 0..n_w {
            let col = &self.sigma_cols[m];
            model.drift_derivative(x, &[col, col], &mut self.tmp)?;
            for (a, t) in self.ab.iter_mut().zip(&self.tmp) {
                *a += 0.5 * t;
            }
        }

        for i in 0..n_w {
            model.drift_derivative(x, &[&self.sigma_cols[i]], &mut self.tmp)?;
            for l in 0..d {
                self.sigma_tilde[l * n_w + i] = self.tmp[l];
            }
        }

        self.constant_sigma = model.constant_diffusion();
        if self.constant_sigma {
            return Ok(());
        }
        model.diffusion_derivative(x, &[&self.b], &mut self.tmp_m)?;
        for (s, t) in self.sigma_tilde.iter_mut().zip(&self.tmp_m) {
            *s += t;
        }
        for m in 0..n_w {
            let col = &self.sigma_cols[m];
            model.diffusion_derivative(x, &[col, col], &mut self.tmp_m)?;
            for (s, t) in self.sigma_tilde.iter_mut().zip(&self.tmp_m) {
                *s += t;
            }
        }
        for j in 0..n_w {
            model.diffusion_derivative(x, &[&self.sigma_cols[j]], &mut self.tmp_m)?;
            for i in 0..n_w {
                let out = &mut self.dsigma_sigma[i * n_w + j];
                for l in 0..d {
                    out[l] = self.tmp_m[l * n_w + i];
                }
            }
        }
        Ok(())
    }

    /// True when the last `compute` saw a constant diffusion (all Dσ terms vanish).
    pub fn constant_diffusion(&self) -> bool {
        self.constant_sigma
    }

    /// `σu`.
    pub fn sigma_u(&self, u: &[f64], out: &mut [f64]) {
        mat_vec(&self.sigma, self.d, self.n_w, u, out);
    }

    /// `s u = ½ σ̃ u`.
    pub fn s_u(&self, u: &[f64], out: &mut [f64]) {
        mat_vec(&self.sigma_tilde, self.d, self.n_w, u, out);
        out.iter_mut().for_each(|v| *v *= 0.5);
    }

    /// `½ Σ_{ij} Dσ_i[σ_j] 𝒲^{ij}`.
    pub fn levy_term(&self, w: &LevyAreaSurrogate, out: &mut [f64]) {
        out.fill(0.0);
        if self.constant_sigma {
            return;
        }
        let n = self.n_w;
        for i in 0..n {
            for j in 0..n {
                let c = 0.5 * w.get(i, j);
                if c != 0.0 {
                    for (o, v) in out.iter_mut().zip(&self.dsigma_sigma[i * n + j]) {
                        *o += c * v;
                    }
                }
            }
        }
    }
}

/// How expectations over (U, κ) are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    /// Exact enumeration. Gaussian innovations use the 4-node Gauss–Hermite
    /// tensor rule, exact for integrands of degree ≤ 7 in each coordinate of U,
    /// which covers every correction operator here.
    Enumerate,
    /// Plain Monte Carlo with a fixed seed.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Expectation estimate; `std_error` is 0 for exact enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }
}

/// E[g(U, 𝒲)] under `quad`. Without `with_kappa`, 𝒲 is not drawn (zeros).
pub(crate) fn expect_over(
    dist: InnovationDist,
    n_w: usize,
    with_kappa: bool,
    quad: Quadrature,
    mut g: impl FnMut(&[f64], &LevyAreaSurrogate) -> Result<f64>,
) -> Result<Estimate> {
    match quad {
        Quadrature::Enumerate => {
            let outcomes = match dist.support() {
                Some(_) => enumerate_outcomes(dist, n_w, with_kappa)?,
                None => {
                    let gh = GaussHermite::new(4)?;
                    let atoms: Vec<(f64, f64)> =
                        gh.nodes.iter().copied().zip(gh.weights.iter().copied()).collect();
                    enumerate_atoms(&atoms, n_w, with_kappa)?
                }
            };
            let mut acc = crate::sum::CompensatedSum::new();
            for o in &outcomes {
                acc.add(o.prob * g(&o.u, &o.w)?);
            }
            Ok(Estimate::exact(acc.value()))
        }
        Quadrature::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter(format!(
                    "Monte Carlo needs at least 2 samples (got {samples})"
                )));
            }
            let mut rng = rng_stream(seed, 0);
            let mut u = vec![0.0; n_w];
            let mut w = LevyAreaSurrogate::zeros(n_w);
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..samples {
                dist.sample_into(&mut rng, &mut u);
                if with_kappa {
                    w.resample(&u, &mut rng);
                }
                let v = g(&u, &w)?;
                let delta = v - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (v - mean);
            }
            let var = m2 / (samples - 1) as f64;
            Ok(Estimate {
                value: mean,
                std_error: (var / samples as f64).sqrt(),
            })
        }
    }
}

/// Euler 𝔐₁f(x) = −½D²f[b,b] − E[½D³f[σU,σU,b] + D⁴f[(σU)⁴]/24].
pub fn m1_euler(
    model: &dyn Diffusion,
    f: &dyn Observable,
    x: &[f64],
    dist: InnovationDist,
    quad: Quadrature,
) -> Result<Estimate> {
    check_dims(model, f, x)?;
    require_order(f, 4)?;
    let (d, n_w) = (model.dim(), model.noise_dim());
    let mut b = vec![0.0; d];
    let mut sigma = vec![0.0; d * n_w];
    model.drift(x, &mut b);
    model.diffusion(x, &mut sigma);
    let bb = 0.5 * f.dirderiv(x, &[&b, &b])?;
    let mut su = vec![0.0; d];
    let est = expect_over(dist, n_w, false, quad, |u, _| {
        mat_vec(&sigma, d, n_w, u, &mut su);
        let s: &[f64] = &su;
        Ok(0.5 * f.dirderiv(x, &[s, s, &b])? + f.dirderiv(x, &[s, s, s, s])? / 24.0)
    })?;
    Ok(Estimate {
        value: -bb - est.value,
        std_error: est.std_error,
    })
}

/// Per-outcome vectors of the Talay increment.
struct TalayParts {
    su: Vec<f64>,
    e: Vec<f64>,
    s: Vec<f64>,
    a: Vec<f64>,
}

impl TalayParts {
    fn new(c: &TalayCoefficients) -> Self {
        let d = c.d;
        Self {
            su: vec![0.0; d],
            e: vec![0.0; d],
            s: vec![0.0; d],
            a: c.ab.iter().map(|v| 0.5 * v).collect(),
        }
    }

    fn fill(&mut self, c: &TalayCoefficients, u: &[f64], w: &LevyAreaSurrogate) {
        c.sigma_u(u, &mut self.su);
        c.s_u(u, &mut self.s);
        c.levy_term(w, &mut self.e);
        for (e, b) in self.e.iter_mut().zip(&c.b) {
            *e += b;
        }
    }

    /// γ² coefficient of f(x + Δ).
    fn c2(&self, f: &dyn Observable, x: &[f64]) -> Result<f64> {
        let (g, e, s, a) = (&self.su[..], &self.e[..], &self.s[..], &self.a[..]);
        Ok(f.dirderiv(x, &[a])?
            + f.dirderiv(x, &[g, s])?
            + 0.5 * f.dirderiv(x, &[e, e])?
            + 0.5 * f.dirderiv(x, &[g, g, e])?
            + f.dirderiv(x, &[g, g, g, g])? / 24.0)
    }

    /// γ³ coefficient of f(x + Δ).
    fn c3(&self, f: &dyn Observable, x: &[f64]) -> Result<f64> {
        let (g, e, s, a) = (&self.su[..], &self.e[..], &self.s[..], &self.a[..]);
        Ok(f.dirderiv(x, &[e, a])?
            + 0.5 * f.dirderiv(x, &[s, s])?
            + 0.5 * f.dirderiv(x, &[g, g, a])?
            + f.dirderiv(x, &[g, e, s])?
            + f.dirderiv(x, &[e, e, e])? / 6.0
            + f.dirderiv(x, &[g, g, g, s])? / 6.0
            + 0.25 * f.dirderiv(x, &[g, g, e, e])?
            + f.dirderiv(x, &[g, g, g, g, e])? / 24.0
            + f.dirderiv(x, &[g, g, g, g, g, g])? / 720.0)
    }
}

fn talay_coefficient(
    model: &dyn Diffusion,
    f: &dyn Observable,
    x: &[f64],
    dist: InnovationDist,
    quad: Quadrature,
    third: bool,
) -> Result<Estimate> {
    check_dims(model, f, x)?;
    require_order(f, if third { 6 } else { 4 })?;
    let mut c = TalayCoefficients::new(model.dim(), model.noise_dim());
    c.compute(model, x)?;
    let mut parts = TalayParts::new(&c);
    let with_kappa = !c.constant_diffusion() && c.n_w > 1;
    expect_over(dist, c.n_w, with_kappa, quad, |u, w| {
        parts.fill(&c, u, w);
        if third {
            parts.c3(f, x)
        } else {
            parts.c2(f, x)
        }
    })
}

/// Talay 𝔐₁f(x): minus the γ² coefficient of E f(X̄_γ) − f(x) − γAf(x).
pub fn m1_talay(
    model: &dyn Diffusion,
    f: &dyn Observable,
    x: &[f64],
    dist: InnovationDist,
    quad: Quadrature,
) -> Result<Estimate> {
    let c2 = talay_coefficient(model, f, x, dist, quad, false)?;
    Ok(Estimate {
        value: -c2.value,
        std_error: c2.std_error,
    })
}

/// Talay 𝔐̃₂f(x): the γ³ coefficient of E f(X̄_γ).
pub fn m2_tilde_talay(
    model: &dyn Diffusion,
    f: &dyn Observable,
    x: &[f64],
    dist: InnovationDist,
    quad: Quadrature,
) -> Result<Estimate> {
    talay_coefficient(model, f, x, dist, quad, true)
}

/// Talay 𝔐₂f = −½𝔐₁(Af) − 𝔐̃₂f. Requires `f.max_order() = 6` and closed-form
/// model derivatives up to order 4 (Af must have four derivatives).
pub fn m2_talay(
    model: &Arc<dyn Diffusion>,
    f: &Arc<dyn Observable>,
    x: &[f64],
    dist: InnovationDist,
    quad: Quadrature,
) -> Result<Estimate> {
    require_order(f.as_ref(), 6)?;
    let af = GeneratorObservable::new(model.clone(), f.clone())?;
    let m1_af = m1_talay(model.as_ref(), &af, x, dist, quad)?;
    let tilde = m2_tilde_talay(model.as_ref(), f.as_ref(), x, dist, quad)?;
    Ok(Estimate {
        value: -0.5 * m1_af.value - tilde.value,
        std_error: m1_af.std_error.hypot(tilde.std_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::Ou1d;
    use crate::model::{DiffusionModel, Monomial};

    fn ou() -> Ou1d {
        Ou1d::new(1.0, 2f64.sqrt()).unwrap()
    }

    const E: Quadrature = Quadrature::Enumerate;
    const TP: InnovationDist = InnovationDist::ThreePoint;

    #[test]
    fn generator_and_variance_examples() {
        let f = Monomial::power(2);
        assert!((generator_apply(&ou(), &f, &[0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(generator_apply(&ou(), &f, &[1.0]).unwrap().abs() < 1e-15);
        assert!((vf_operator(&ou(), &f, &[1.0]).unwrap() - 8.0).abs() < 1e-14);
        assert_eq!(vf_operator(&ou(), &f, &[0.0]).unwrap(), 0.0);
        let one = Monomial::power(0);
        assert_eq!(generator_apply(&ou(), &one, &[0.4]).unwrap(), 0.0);
        assert_eq!(vf_operator(&ou(), &one, &[0.4]).unwrap(), 0.0);
        let lin = Monomial::parse("x", 1).unwrap();
        let low = crate::model::FnObservable::new(1, 1, |x| x[0], |_, _| 1.0);
        assert!(matches!(
            generator_apply(&ou(), &low, &[0.0]),
            Err(Error::InsufficientOrder { .. })
        ));
        assert!((generator_apply(&ou(), &lin, &[2.0]).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn talay_fields_examples() {
        let st = sigma_tilde(&ou(), &[3.0]).unwrap();
        assert!((st[0] + 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(drift_generator(&ou(), &[2.0]).unwrap(), vec![2.0]);

        // b = 0, σ(x) = x²: σ̃ = σσ'' = 2x⁴
        let m = DiffusionModel::new(1, 1, |_, o| o[0] = 0.0, |x, o| o[0] = x[0] * x[0])
            .with_drift_derivatives(6, |_, _, o| o[0] = 0.0)
            .with_diffusion_derivatives(6, |x, dirs, o| {
                let v: f64 = dirs.iter().map(|d| d[0]).product();
                o[0] = match dirs.len() {
                    1 => 2.0 * x[0] * v,
                    2 => 2.0 * v,
                    _ => 0.0,
                }
            });
        let st = sigma_tilde(&m, &[1.5]).unwrap();
        assert!((st[0] - 2.0 * 1.5f64.powi(4)).abs() < 1e-12);
        // σ(x) = x: σ̃ = 0
        let lin = DiffusionModel::new(1, 1, |_, o| o[0] = 0.0, |x, o| o[0] = x[0]);
        assert!(sigma_tilde(&lin, &[0.7]).unwrap()[0].abs() < 1e-9);

        let flat = DiffusionModel::new(1, 1, |_, o| o[0] = 0.3, |_, o| o[0] = 0.5);
        assert!(sigma_tilde(&flat, &[1.0]).unwrap()[0].abs() < 1e-9);
        assert!(drift_generator(&flat, &[1.0]).unwrap()[0].abs() < 1e-9);
    }

    #[test]
    fn correction_operators_on_ou() {
        let f = Monomial::power(2);
        for x in [0.0, 1.0, -1.7] {
            let xx = x * x;
            let e = m1_euler(&ou(), &f, &[x], TP, E).unwrap();
            assert!((e.value + xx).abs() < 1e-13);
            assert_eq!(e.std_error, 0.0);
            let t = m1_talay(&ou(), &f, &[x], TP, E).unwrap();
            assert!((t.value - (2.0 - 2.0 * xx)).abs() < 1e-13);
            let c3 = m2_tilde_talay(&ou(), &f, &[x], TP, E).unwrap();
            assert!((c3.value - (0.5 - xx)).abs() < 1e-13);
        }
        let model: Arc<dyn Diffusion> = Arc::new(ou());
        let f: Arc<dyn Observable> = Arc::new(Monomial::power(2));
        let m2 = m2_talay(&model, &f, &[1.0], TP, E).unwrap();
        assert!((m2.value - 0.5).abs() < 1e-13);
        let lin = Monomial::parse("x", 1).unwrap();
        assert_eq!(m1_euler(&ou(), &lin, &[3.0], TP, E).unwrap().value, 0.0);
    }

    #[test]
    fn gaussian_enumeration_is_exact_gauss_hermite() {
        let f = Monomial::power(4);
        // Euler 𝔐₁ sees moments of U up to order 4, which the three-point law matches
        let g = m1_euler(&ou(), &f, &[1.0], InnovationDist::Gaussian, E).unwrap();
        let t = m1_euler(&ou(), &f, &[1.0], TP, E).unwrap();
        assert!((g.value - t.value).abs() < 1e-12);
        // the D⁶f[(σU)⁶]/720 term of 𝔐̃₂ for x⁶ is 8 E[U⁶]: 120 vs 72
        let model: Arc<dyn Diffusion> = Arc::new(ou());
        let f6: Arc<dyn Observable> = Arc::new(Monomial::power(6));
        let g = m2_tilde_talay(model.as_ref(), f6.as_ref(), &[0.3], InnovationDist::Gaussian, E)
            .unwrap();
        let t = m2_tilde_talay(model.as_ref(), f6.as_ref(), &[0.3], TP, E).unwrap();
        assert!((g.value - t.value - 48.0).abs() < 1e-9, "{} {}", g.value, t.value);
        assert!(m1_euler(
            &ou(),
            &f,
            &[1.0],
            InnovationDist::Gaussian,
            Quadrature::MonteCarlo { samples: 0, seed: 1 }
        )
        .is_err());
    }
}
