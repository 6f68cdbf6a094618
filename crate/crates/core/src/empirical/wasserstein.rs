//! W₁ between weighted atoms and a reference law on ℝ, or between two atom sets.

use super::law::AnalyticLaw1D;
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Tail probability below which the quadrature fallback truncates the support.
const TAIL: f64 = 1e-6;

/// Sorts atoms by position and normalizes weights to a probability vector.
fn normalize(atoms: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut total = CompensatedSum::new();
    for &(x, w) in atoms {
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("atom position {x}")));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::NegativeWeight(w));
        }
        total.add(w);
    }
    let total = total.value();
    if total <= 0.0 {
        return Err(Error::EmptyMeasure);
    }
    let mut out: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// `∫ |F_n − F|` where F_n is the CDF of the weighted atoms.
pub fn wasserstein1_atoms_to_law(atoms: &[(f64, f64)], law: &AnalyticLaw1D) -> Result<f64> {
    let atoms = normalize(atoms)?;
    let m = atoms.len();
    let mut total = CompensatedSum::new();
    match law.partial() {
        Some((g, mean)) => {
            let (first, last) = (atoms[0].0, atoms[m - 1].0);
            total.add(g(first));
            let mut acc = CompensatedSum::new();
            for i in 0..m - 1 {
                acc.add(atoms[i].1);
                let c = acc.value().min(1.0);
                let (a, b) = (atoms[i].0, atoms[i + 1].0);
                if b <= a {
                    continue;
                }
                let (ga, gb) = (g(a), g(b));
                let t = split_point(law, c, a, b);
                let gt = if t == a {
                    ga
                } else if t == b {
                    gb
                } else {
                    g(t)
                };
                total.add(c * (t - a) - (gt - ga) + (gb - gt) - c * (b - t));
            }
            total.add(g(last) + mean - last);
        }
        None => {
            let lo = law.quantile(TAIL);
            let hi = law.quantile(1.0 - TAIL);
            let f = |t: f64| law.cdf(t);
            let (first, last) = (atoms[0].0, atoms[m - 1].0);
            if first > lo {
                total.add(simpson(&f, lo, first));
            }
            let mut acc = CompensatedSum::new();
            for i in 0..m - 1 {
                acc.add(atoms[i].1);
                let c = acc.value().min(1.0);
                let (a, b) = (atoms[i].0, atoms[i + 1].0);
                if b <= a {
                    continue;
                }
                let t = split_point(law, c, a, b);
                let below = |s: f64| c - f(s);
                let above = |s: f64| f(s) - c;
                total.add(simpson(&below, a, t) + simpson(&above, t, b));
            }
            if last < hi {
                total.add(simpson(&|s: f64| 1.0 - f(s), last, hi));
            }
        }
    }
    Ok(total.value().max(0.0))
}

/// Where F crosses the level c inside [a, b].
fn split_point(law: &AnalyticLaw1D, c: f64, a: f64, b: f64) -> f64 {
    if c <= 0.0 {
        a
    } else if c >= 1.0 {
        b
    } else {
        law.quantile(c).clamp(a, b)
    }
}

/// `∫ |F_a − F_b|` for two weighted atom sets.
pub fn wasserstein1_discrete(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let a = normalize(a)?;
    let b = normalize(b)?;
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .map(|&(x, w)| (x, w))
        .chain(b.iter().map(|&(x, w)| (x, -w)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = CompensatedSum::new();
    let mut total = CompensatedSum::new();
    for pair in events.windows(2) {
        diff.add(pair[0].1);
        total.add(diff.value().abs() * (pair[1].0 - pair[0].0));
    }
    Ok(total.value())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive(f, a, b, fa, fm, fb, whole, 1e-12, 40)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
