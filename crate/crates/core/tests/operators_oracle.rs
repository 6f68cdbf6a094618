//! Correction operators on the Ornstein–Uhlenbeck model checked against a
//! polynomial expansion in γ of E[X̄_γ^k], built from the closed-form one-step
//! maps and the innovation moments.

use std::sync::Arc;

use proptest::prelude::*;

use ergodic::harness::theoretical_exponent;
use ergodic::model::{
    generator_apply, m1_euler, m1_talay, m2_talay, m2_tilde_talay, Diffusion, Monomial,
    Observable, Ou1d, Quadrature,
};
use ergodic::schemes::InnovationDist;

const DEG: usize = 8;

type Poly = [f64; DEG];

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = [0.0; DEG];
    for i in 0..DEG {
        for j in 0..DEG - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn pow(a: &Poly, k: usize) -> Poly {
    let mut out = [0.0; DEG];
    out[0] = 1.0;
    for _ in 0..k {
        out = mul(&out, a);
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients in γ of E[(x·a(γ) + σ√γ·c(γ)·U)^k] for symmetric U.
fn expected_power(k: usize, x: f64, sigma: f64, a: &Poly, c: &Poly, dist: InnovationDist) -> Poly {
    let mut out = [0.0; DEG];
    for j in (0..=k).step_by(2) {
        let mut term = mul(&pow(a, k - j), &pow(c, j));
        let scale = binom(k, j) * x.powi((k - j) as i32) * sigma.powi(j as i32) * dist.moment(j as u32);
        // shift by γ^{j/2}
        let s = j / 2;
        let mut shifted = [0.0; DEG];
        for i in 0..DEG - s {
            shifted[i + s] = term[i] * scale;
        }
        term = shifted;
        for i in 0..DEG {
            out[i] += term[i];
        }
    }
    out
}

fn euler_maps(theta: f64) -> (Poly, Poly) {
    let mut a = [0.0; DEG];
    a[0] = 1.0;
    a[1] = -theta;
    let mut c = [0.0; DEG];
    c[0] = 1.0;
    (a, c)
}

fn talay_maps(theta: f64) -> (Poly, Poly) {
    let mut a = [0.0; DEG];
    a[0] = 1.0;
    a[1] = -theta;
    a[2] = 0.5 * theta * theta;
    let mut c = [0.0; DEG];
    c[0] = 1.0;
    c[1] = -0.5 * theta;
    (a, c)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn dists() -> impl Strategy<Value = InnovationDist> {
    prop_oneof![
        Just(InnovationDist::Rademacher),
        Just(InnovationDist::ThreePoint),
        Just(InnovationDist::Gaussian),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn euler_first_coefficients(theta in 0.2f64..3.0, sigma in 0.2f64..2.5, x in -3.0f64..3.0, k in 0usize..7, dist in dists()) {
        let model = Ou1d::new(theta, sigma).unwrap();
        let f = Monomial::power(k as u32);
        let (a, c) = euler_maps(theta);
        let p = expected_power(k, x, sigma, &a, &c, dist);
        prop_assert!(close(p[0], f.value(&[x])));
        prop_assert!(close(p[1], generator_apply(&model, &f, &[x]).unwrap()));
        let m1 = m1_euler(&model, &f, &[x], dist, Quadrature::Enumerate).unwrap();
        prop_assert!(close(-p[2], m1.value), "{} vs {}", -p[2], m1.value);
    }

    #[test]
    fn talay_first_coefficients(theta in 0.2f64..3.0, sigma in 0.2f64..2.5, x in -3.0f64..3.0, k in 0usize..7, dist in dists()) {
        let model = Ou1d::new(theta, sigma).unwrap();
        let f = Monomial::power(k as u32);
        let (a, c) = talay_maps(theta);
        let p = expected_power(k, x, sigma, &a, &c, dist);
        prop_assert!(close(p[1], generator_apply(&model, &f, &[x]).unwrap()));
        let m1 = m1_talay(&model, &f, &[x], dist, Quadrature::Enumerate).unwrap();
        prop_assert!(close(-p[2], m1.value), "{} vs {}", -p[2], m1.value);
        let m2 = m2_tilde_talay(&model, &f, &[x], dist, Quadrature::Enumerate).unwrap();
        prop_assert!(close(p[3], m2.value), "{} vs {}", p[3], m2.value);
    }
}

/// With a matching fifth-moment innovation, the γ² coefficient of the Talay
/// expansion equals A²f/2, so the weak order is two.
#[test]
fn talay_second_coefficient_is_half_iterated_generator() {
    let model: Arc<dyn Diffusion> = Arc::new(Ou1d::new(1.0, 2f64.sqrt()).unwrap());
    for k in 0..=6usize {
        let f: Arc<dyn Observable> = Arc::new(Monomial::power(k as u32));
        let af = ergodic::model::GeneratorObservable::new(model.clone(), f.clone()).unwrap();
        let (a, c) = talay_maps(1.0);
        for x in [-1.3, 0.0, 0.4, 2.0] {
            let p = expected_power(k, x, 2f64.sqrt(), &a, &c, InnovationDist::ThreePoint);
            let a2f = generator_apply(model.as_ref(), &af, &[x]).unwrap();
            assert!(close(p[2], 0.5 * a2f), "k={k} x={x}: {} vs {}", p[2], 0.5 * a2f);
        }
    }
}

/// Reference values used throughout: b = −x, σ = √2, f = x².
#[test]
fn reference_model_closed_forms() {
    let model: Arc<dyn Diffusion> = Arc::new(Ou1d::new(1.0, 2f64.sqrt()).unwrap());
    let f: Arc<dyn Observable> = Arc::new(Monomial::power(2));
    let q = Quadrature::Enumerate;
    let g = InnovationDist::Gaussian;
    let law = Ou1d::new(1.0, 2f64.sqrt()).unwrap().invariant_law();
    for x in [-2.0, -0.5, 0.0, 1.0, 3.0] {
        assert!(close(generator_apply(model.as_ref(), f.as_ref(), &[x]).unwrap(), 2.0 - 2.0 * x * x));
        assert!(close(m1_euler(model.as_ref(), f.as_ref(), &[x], g, q).unwrap().value, -x * x));
    }
    let nu = |h: &dyn Fn(f64) -> f64| law.expect(|x| h(x[0])).unwrap();
    let m1e = nu(&|x| m1_euler(model.as_ref(), f.as_ref(), &[x], g, q).unwrap().value);
    assert!(close(m1e, -1.0));
    let f6: Arc<dyn Observable> = Arc::new(Monomial::power(6));
    assert!(m2_talay(&model, &f6, &[0.5], g, q).is_ok());
}

/// The exponent min(qξ, ½ − ξ/2) peaks at ξ = 1/(2q+1): n^{1/3} with ξ = 1/3
/// for the first-order scheme and n^{2/5} with ξ = 1/5 for the second-order one.
#[test]
fn best_rates_and_step_exponents() {
    for (q, xi_star, rate) in [(1usize, 1.0 / 3.0, 1.0 / 3.0), (2, 0.2, 0.4)] {
        let (best_xi, best) = (1..1000)
            .map(|i| i as f64 / 1000.0)
            .map(|xi| (xi, -theoretical_exponent(q, xi)))
            .fold((0.0, f64::MIN), |acc, v| if v.1 > acc.1 { v } else { acc });
        assert!((best_xi - xi_star).abs() <= 1e-3, "q={q}: {best_xi}");
        assert!((best - rate).abs() <= 1e-3, "q={q}: {best}");
        assert!((-theoretical_exponent(q, xi_star) - rate).abs() < 1e-15);
    }
}
