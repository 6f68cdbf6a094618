//! One-step weak error against the Taylor expansion of the semigroup.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{generator_apply, require_order, Diffusion, GeneratorObservable, Observable};
use crate::schemes::{enumerate_outcomes, InnovationDist, Scheme, Stepper};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakOrderReport {
    pub scheme: Scheme,
    pub innovation: InnovationDist,
    pub x: Vec<f64>,
    /// (γ, err(γ)) in the order given.
    pub errors: Vec<(f64, f64)>,
    /// err(γ_i)/err(γ_{i+1}) for consecutive entries.
    pub ratios: Vec<f64>,
}

/// err(γ) = E f(X̄_γ) − T_γ f(x) from X̄_0 = x, with the expectation taken by
/// exhaustive enumeration and T_γ f = f + γAf (Euler) or f + γAf + γ²/2 A²f (Talay).
pub fn weak_order_probe(
    scheme: Scheme,
    model: &Arc<dyn Diffusion>,
    f: &Arc<dyn Observable>,
    x: &[f64],
    gammas: &[f64],
    dist: InnovationDist,
) -> Result<WeakOrderReport> {
    let (d, n_w) = (model.dim(), model.noise_dim());
    if x.len() != d || f.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { f.dim() },
        });
    }
    let with_kappa = scheme == Scheme::Talay2 && n_w > 1 && !model.constant_diffusion();
    let outcomes = enumerate_outcomes(dist, n_w, with_kappa)?;
    let fx = f.value(x);
    let af = generator_apply(model.as_ref(), f.as_ref(), x)?;
    let a2f = match scheme {
        Scheme::Euler => 0.0,
        Scheme::Talay2 => {
            require_order(f.as_ref(), 4)?;
            let g = GeneratorObservable::new(model.clone(), f.clone())?;
            generator_apply(model.as_ref(), &g, x)?
        }
    };
    let mut stepper = Stepper::new(scheme, dist, d, n_w);
    let mut y = vec![0.0; d];
    let mut errors = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut acc = CompensatedSum::new();
        for o in &outcomes {
            y.copy_from_slice(x);
            stepper.step_with(model.as_ref(), &mut y, gamma, &o.u, Some(&o.w))?;
            acc.add(o.prob * f.value(&y));
        }
        // subtract the target term by term so the leading terms cancel exactly
        acc.add(-fx);
        acc.add(-gamma * af);
        acc.add(-0.5 * gamma * gamma * a2f);
        errors.push((gamma, acc.value()));
    }
    let ratios = errors.windows(2).map(|w| w[0].1 / w[1].1).collect();
    Ok(WeakOrderReport {
        scheme,
        innovation: dist,
        x: x.to_vec(),
        errors,
        ratios,
    })
}
