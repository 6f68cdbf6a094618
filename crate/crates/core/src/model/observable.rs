//! Concrete test functions: monomials, closures, linear combinations, and Af.

use std::fmt;
use std::sync::Arc;

use super::{column, require_order, Diffusion, Observable};
use crate::error::{Error, Result};

/// Highest derivative order exposed by built-in observables.
pub const MAX_ORDER: usize = 6;

/// `coef · Π_i x_i^{e_i}` with exact derivatives of every order.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    coef: f64,
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(coef: f64, exps: Vec<u32>) -> Result<Self> {
        if exps.is_empty() {
            return Err(Error::InvalidParameter("monomial needs dimension >= 1".into()));
        }
        if !coef.is_finite() {
            return Err(Error::InvalidParameter(format!("monomial coefficient {coef}")));
        }
        Ok(Self { coef, exps })
    }

    /// `x^k` in dimension 1.
    pub fn power(k: u32) -> Self {
        Self {
            coef: 1.0,
            exps: vec![k],
        }
    }

    /// Parses `x^k`, `x` (d = 1 shorthand for `x1`), `x1^2*x2`, `3*x^2`, or `1`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let bad = || Error::UnknownObservable(text.to_string());
        if dim == 0 {
            return Err(bad());
        }
        let mut coef = 1.0;
        let mut exps = vec![0u32; dim];
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        for factor in compact.split('*') {
            if let Some(rest) = factor.strip_prefix('x') {
                let (index, power) = match rest.split_once('^') {
                    Some((i, p)) => (i, p.parse::<u32>().map_err(|_| bad())?),
                    None => (rest, 1),
                };
                let coord = if index.is_empty() {
                    if dim != 1 {
                        return Err(bad());
                    }
                    0
                } else {
                    let i: usize = index.parse().map_err(|_| bad())?;
                    if i == 0 || i > dim {
                        return Err(bad());
                    }
                    i - 1
                };
                exps[coord] += power;
            } else {
                let c: f64 = factor.parse().map_err(|_| bad())?;
                coef *= c;
            }
        }
        Self::new(coef, exps)
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    fn eval(coef: f64, exps: &mut [u32], x: &[f64], dirs: &[&[f64]]) -> f64 {
        if coef == 0.0 {
            return 0.0;
        }
        match dirs.split_first() {
            None => exps
                .iter()
                .zip(x)
                .fold(coef, |acc, (&e, &xi)| acc * xi.powi(e as i32)),
            Some((v, rest)) => {
                let mut total = 0.0;
                for i in 0..exps.len() {
                    let e = exps[i];
                    if e == 0 || v[i] == 0.0 {
                        continue;
                    }
                    exps[i] -= 1;
                    total += v[i] * Self::eval(coef * e as f64, exps, x, rest);
                    exps[i] += 1;
                }
                total
            }
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.coef != 1.0 || self.degree() == 0 {
            parts.push(format!("{}", self.coef));
        }
        for (i, &e) in self.exps.iter().enumerate() {
            let name = if self.exps.len() == 1 {
                "x".to_string()
            } else {
                format!("x{}", i + 1)
            };
            match e {
                0 => {}
                1 => parts.push(name),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        write!(f, "{}", parts.join("*"))
    }
}

impl Observable for Monomial {
    fn dim(&self) -> usize {
        self.exps.len()
    }

    fn max_order(&self) -> usize {
        MAX_ORDER
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(x)
            .fold(self.coef, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }

    fn dirderiv(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64> {
        require_order(self, dirs.len())?;
        if dirs.is_empty() {
            return Ok(self.value(x));
        }
        let mut exps = self.exps.clone();
        Ok(Self::eval(self.coef, &mut exps, x, dirs))
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type DirFn = Box<dyn Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync>;

/// Closure-backed observable; `deriv` is only called with `1 ≤ k ≤ max_order`.
pub struct FnObservable {
    dim: usize,
    max_order: usize,
    value: ValueFn,
    deriv: DirFn,
}

impl fmt::Debug for FnObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObservable")
            .field("dim", &self.dim)
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl FnObservable {
    pub fn new(
        dim: usize,
        max_order: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            max_order: max_order.min(MAX_ORDER),
            value: Box::new(value),
            deriv: Box::new(deriv),
        }
    }
}

impl Observable for FnObservable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn dirderiv(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64> {
        if dirs.is_empty() {
            return Ok((self.value)(x));
        }
        require_order(self, dirs.len())?;
        Ok((self.deriv)(x, dirs))
    }
}

/// `Σ c_i f_i`.
#[derive(Clone)]
pub struct LinearCombination {
    dim: usize,
    terms: Vec<(f64, Arc<dyn Observable>)>,
}

impl fmt::Debug for LinearCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearCombination")
            .field("dim", &self.dim)
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn Observable>)>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, f)| f.dim())
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        for (_, f) in &terms {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
        }
        Ok(Self { dim, terms })
    }
}

impl Observable for LinearCombination {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.terms.iter().map(|(_, f)| f.max_order()).min().unwrap_or(0)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum()
    }

    fn dirderiv(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64> {
        let mut total = 0.0;
        for (c, f) in &self.terms {
            total += c * f.dirderiv(x, dirs)?;
        }
        Ok(total)
    }
}

/// `Af = Df[b] + ½ Σ_m D²f[σ_m, σ_m]` as an observable.
///
/// Derivatives come from the product rule over the model's closed-form
/// derivatives, so the available order is
/// `min(f.max_order − 2, model.analytic_order())`. Finite differences of Af are
/// never taken.
#[derive(Clone)]
pub struct GeneratorObservable {
    model: Arc<dyn Diffusion>,
    f: Arc<dyn Observable>,
}

impl fmt::Debug for GeneratorObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorObservable")
            .field("dim", &self.f.dim())
            .field("max_order", &self.max_order())
            .finish()
    }
}

impl GeneratorObservable {
    pub fn new(model: Arc<dyn Diffusion>, f: Arc<dyn Observable>) -> Result<Self> {
        if model.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: f.dim(),
            });
        }
        require_order(f.as_ref(), 2)?;
        Ok(Self { model, f })
    }
}

/// Indices of bits set in `mask`.
fn members(mask: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).filter(move |i| mask & (1 << i) != 0)
}

impl Observable for GeneratorObservable {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn max_order(&self) -> usize {
        (self.f.max_order() - 2).min(self.model.analytic_order())
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.dirderiv(x, &[]).unwrap_or(f64::NAN)
    }

    fn dirderiv(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64> {
        require_order(self, dirs.len())?;
        let k = dirs.len();
        let d = self.model.dim();
        let n_w = self.model.noise_dim();
        let subsets = 1usize << k;
        let full = subsets - 1;

        // D^{|S|} b[v_S] and D^{|S|} σ[v_S] for every subset S of the directions
        let mut db = vec![vec![0.0; d]; subsets];
        let mut dsig = vec![vec![0.0; d * n_w]; subsets];
        for s in 0..subsets {
            let sel: Vec<&[f64]> = members(s, k).map(|i| dirs[i]).collect();
            self.model.drift_derivative(x, &sel, &mut db[s])?;
            self.model.diffusion_derivative(x, &sel, &mut dsig[s])?;
        }

        let mut total = 0.0;
        for s in 0..subsets {
            let mut args: Vec<&[f64]> = members(full & !s, k).map(|i| dirs[i]).collect();
            args.push(&db[s]);
            total += self.f.dirderiv(x, &args)?;
        }

        // each direction lands on D²f (0), the first σ_m (1) or the second σ_m (2)
        let mut cols: Vec<Vec<Vec<f64>>> = Vec::with_capacity(subsets);
        for m in &dsig {
            cols.push((0..n_w).map(|i| column(m, d, n_w, i)).collect());
        }
        let mut half = 0.0;
        let assignments = 3usize.pow(k as u32);
        for code in 0..assignments {
            let (mut on_f, mut s1, mut s2) = (Vec::new(), 0usize, 0usize);
            let mut c = code;
            for (i, dir) in dirs.iter().enumerate() {
                match c % 3 {
                    0 => on_f.push(*dir),
                    1 => s1 |= 1 << i,
                    _ => s2 |= 1 << i,
                }
                c /= 3;
            }
            for m in 0..n_w {
                let mut args = on_f.clone();
                args.push(&cols[s1][m]);
                args.push(&cols[s2][m]);
                half += self.f.dirderiv(x, &args)?;
            }
        }
        Ok(total + 0.5 * half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::{DoubleWell, Ou1d};

    #[test]
    fn parses_monomials() {
        let m = Monomial::parse("x^3", 1).unwrap();
        assert_eq!(m.value(&[2.0]), 8.0);
        let p = Monomial::parse("x1^2*x2", 2).unwrap();
        assert_eq!(p.value(&[3.0, 2.0]), 18.0);
        assert_eq!(p.to_string(), "x1^2*x2");
        let c = Monomial::parse("2.5*x", 1).unwrap();
        assert_eq!(c.value(&[2.0]), 5.0);
        assert_eq!(Monomial::parse("1", 1).unwrap().value(&[7.0]), 1.0);
        assert!(Monomial::parse("x3", 2).is_err());
        assert!(Monomial::parse("x^", 1).is_err());
        assert!(Monomial::parse("y^2", 1).is_err());
        assert!(Monomial::parse("x^2", 2).is_err());
    }

    #[test]
    fn monomial_derivatives_are_exact() {
        let m = Monomial::power(4);
        // D^k x^4 along unit vectors: 4x³, 12x², 24x, 24, 0
        let x = [1.5];
        let e: &[f64] = &[1.0];
        assert_eq!(m.dirderiv(&x, &[e]).unwrap(), 4.0 * 1.5f64.powi(3));
        assert_eq!(m.dirderiv(&x, &[e, e]).unwrap(), 12.0 * 2.25);
        assert_eq!(m.dirderiv(&x, &[e, e, e, e]).unwrap(), 24.0);
        assert_eq!(m.dirderiv(&x, &[e, e, e, e, e]).unwrap(), 0.0);
        assert!(matches!(
            m.dirderiv(&x, &[e; 7]),
            Err(Error::InsufficientOrder { .. })
        ));

        // mixed: f = x1^2 x2, D²f[e1, e2] = 2 x1
        let p = Monomial::parse("x1^2*x2", 2).unwrap();
        let d = p.dirderiv(&[3.0, 5.0], &[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(d, 6.0);
    }

    #[test]
    fn generator_of_x2_under_ou() {
        let model: Arc<dyn Diffusion> = Arc::new(Ou1d::new(1.0, 2f64.sqrt()).unwrap());
        let af = GeneratorObservable::new(model, Arc::new(Monomial::power(2))).unwrap();
        // Af = 2 − 2x²
        for x in [-1.5, 0.0, 0.7, 2.0] {
            assert!((af.value(&[x]) - (2.0 - 2.0 * x * x)).abs() < 1e-12);
            let d1 = af.dirderiv(&[x], &[&[1.0]]).unwrap();
            assert!((d1 + 4.0 * x).abs() < 1e-12);
            let d2 = af.dirderiv(&[x], &[&[1.0], &[1.0]]).unwrap();
            assert!((d2 + 4.0).abs() < 1e-12);
        }
        assert_eq!(af.max_order(), 4);
    }

    #[test]
    fn generator_derivatives_match_symbolic_double_well() {
        // b = x − x³, σ = s: f = x⁴ gives Af = 4x³(x − x³) + 6s²x² = 4x⁴ − 4x⁶ + 6s²x²
        let s = 0.8;
        let model: Arc<dyn Diffusion> = Arc::new(DoubleWell::new(s).unwrap());
        let af = GeneratorObservable::new(model, Arc::new(Monomial::power(4))).unwrap();
        let x = 1.3f64;
        let e: &[f64] = &[1.0];
        let exact = [
            4.0 * x.powi(4) - 4.0 * x.powi(6) + 6.0 * s * s * x * x,
            16.0 * x.powi(3) - 24.0 * x.powi(5) + 12.0 * s * s * x,
            48.0 * x * x - 120.0 * x.powi(4) + 12.0 * s * s,
            96.0 * x - 480.0 * x.powi(3),
            96.0 - 1440.0 * x * x,
        ];
        let dirs = [e; 4];
        for (k, want) in exact.iter().enumerate() {
            let got = af.dirderiv(&[x], &dirs[..k]).unwrap();
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "k={k}");
        }
    }
}
