//! Gauss–Hermite rules for expectations under normal laws.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights with `E[g(Z)] ≈ Σ w_i g(x_i)` for `Z ~ N(0, 1)`; exact for
/// polynomials of degree `≤ 2m − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence, `1 ≤ m ≤ 200`.
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > 200 {
            return Err(Error::InvalidParameter(format!(
                "Gauss-Hermite order {m} outside 1..=200"
            )));
        }
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; m];
        let mut w = vec![0.0; m];
        let half = m.div_ceil(2);
        let mf = m as f64;
        let mut z = 0.0f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * mf + 1.0).sqrt() - 1.85575 * (2.0 * mf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * mf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..m {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * mf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[m - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[m - 1 - i] = w[i];
        }
        // physicists' rule (weight e^{-t²}) to the standard normal
        let nodes = x.iter().rev().map(|t| t * 2f64.sqrt()).collect();
        let weights = w.iter().rev().map(|v| v / PI.sqrt()).collect();
        Ok(Self { nodes, weights })
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_normal_moments() {
        let gh = GaussHermite::new(20).unwrap();
        let total: f64 = gh.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        // E Z^{2k} = (2k−1)!!
        let mut dfact = 1.0;
        for k in 1..=10 {
            dfact *= (2 * k - 1) as f64;
            let got = gh.expect(|x| x.powi(2 * k as i32));
            assert!((got - dfact).abs() < 1e-10 * dfact, "k={k}");
            assert!(gh.expect(|x| x.powi(2 * k as i32 - 1)).abs() < 1e-10 * dfact);
        }
    }

    #[test]
    fn small_orders() {
        let gh = GaussHermite::new(1).unwrap();
        assert_eq!(gh.nodes, vec![0.0]);
        assert!((gh.weights[0] - 1.0).abs() < 1e-14);
        let gh = GaussHermite::new(2).unwrap();
        assert!((gh.nodes[1] - 1.0).abs() < 1e-14);
        assert!(GaussHermite::new(0).is_err());
    }
}
