//! Central finite differences along direction vectors.

use crate::error::{Error, Result};

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

pub(crate) fn directional(
    eval: impl Fn(&[f64], &mut [f64]),
    x: &[f64],
    dirs: &[&[f64]],
    out: &mut [f64],
    what: &'static str,
) -> Result<()> {
    directional_with_step(eval, x, dirs, out, what, None)
}

/// `(D^k g(x); v_1, …, v_k)` for k ≤ 2. Default steps are
/// ε^{1/3}(1+|x|∞) for k = 1 and ε^{1/4}(1+|x|∞) for k = 2, rescaled by |v|∞.
pub(crate) fn directional_with_step(
    eval: impl Fn(&[f64], &mut [f64]),
    x: &[f64],
    dirs: &[&[f64]],
    out: &mut [f64],
    what: &'static str,
    h: Option<f64>,
) -> Result<()> {
    let scale = 1.0 + inf_norm(x);
    let mut plus = vec![0.0; out.len()];
    let mut minus = vec![0.0; out.len()];
    let mut y = x.to_vec();
    match dirs.len() {
        0 => {
            eval(x, out);
            Ok(())
        }
        1 => {
            let v = dirs[0];
            let nv = inf_norm(v);
            if nv == 0.0 {
                out.fill(0.0);
                return Ok(());
            }
            let h = h.unwrap_or(f64::EPSILON.cbrt() * scale) / nv;
            for (yi, (xi, vi)) in y.iter_mut().zip(x.iter().zip(v)) {
                *yi = xi + h * vi;
            }
            eval(&y, &mut plus);
            for (yi, (xi, vi)) in y.iter_mut().zip(x.iter().zip(v)) {
                *yi = xi - h * vi;
            }
            eval(&y, &mut minus);
            for (o, (p, m)) in out.iter_mut().zip(plus.iter().zip(&minus)) {
                *o = (p - m) / (2.0 * h);
            }
            Ok(())
        }
        2 => {
            let (v, w) = (dirs[0], dirs[1]);
            let (nv, nw) = (inf_norm(v), inf_norm(w));
            if nv == 0.0 || nw == 0.0 {
                out.fill(0.0);
                return Ok(());
            }
            let base = h.unwrap_or(f64::EPSILON.sqrt().sqrt() * scale);
            let (hv, hw) = (base / nv, base / nw);
            let mut acc = vec![0.0; out.len()];
            for (sv, sw, sign) in [
                (1.0, 1.0, 1.0),
                (1.0, -1.0, -1.0),
                (-1.0, 1.0, -1.0),
                (-1.0, -1.0, 1.0),
            ] {
                for i in 0..x.len() {
                    y[i] = x[i] + sv * hv * v[i] + sw * hw * w[i];
                }
                eval(&y, &mut plus);
                for (a, p) in acc.iter_mut().zip(&plus) {
                    *a += sign * p;
                }
            }
            for (o, a) in out.iter_mut().zip(&acc) {
                *o = a / (4.0 * hv * hw);
            }
            Ok(())
        }
        k => Err(Error::MissingDerivative { what, order: k }),
    }
}
