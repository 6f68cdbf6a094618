//! Mixed moments of the innovation law against those of N(0, I).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::InnovationDist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDeviation {
    /// Exponent of each coordinate, so the moment is E[Π U_i^{k_i}].
    pub exponents: Vec<u32>,
    pub order: u32,
    pub innovation_moment: f64,
    pub gaussian_moment: f64,
    /// gaussian − innovation.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatchReport {
    pub innovation: InnovationDist,
    pub noise_dim: usize,
    pub max_order: u32,
    pub entries: Vec<MomentDeviation>,
    pub max_abs_deviation: f64,
    /// Largest order through which every mixed moment matches.
    pub matched_through: u32,
}

/// Integer moment E[X^k] of one coordinate; every supported law has integer
/// even moments, so the comparison is exact.
fn coordinate_moment(dist: InnovationDist, k: u32) -> u64 {
    if k % 2 == 1 {
        return 0;
    }
    let half = k / 2;
    match dist {
        InnovationDist::Gaussian => (1..=half as u64).map(|j| 2 * j - 1).product(),
        InnovationDist::Rademacher => 1,
        InnovationDist::ThreePoint if k == 0 => 1,
        InnovationDist::ThreePoint => 3u64.pow(half - 1),
    }
}

/// Compares every mixed moment of order 1..=q of U ∈ ℝ^N (independent coordinates)
/// with the Gaussian value, the number of Isserlis pairings Π (k_i − 1)!!.
pub fn moment_match_report(
    dist: InnovationDist,
    noise_dim: usize,
    q: u32,
) -> Result<MomentMatchReport> {
    if !(1..=6).contains(&q) {
        return Err(Error::InvalidParameter(format!("moment order must lie in 1..=6 (got {q})")));
    }
    if noise_dim == 0 {
        return Err(Error::InvalidParameter("noise dimension must be >= 1".into()));
    }
    let mut entries = Vec::new();
    for order in 1..=q {
        for exponents in compositions(order, noise_dim) {
            let own: u64 = exponents.iter().map(|&k| coordinate_moment(dist, k)).product();
            let gauss: u64 = exponents
                .iter()
                .map(|&k| coordinate_moment(InnovationDist::Gaussian, k))
                .product();
            entries.push(MomentDeviation {
                exponents,
                order,
                innovation_moment: own as f64,
                gaussian_moment: gauss as f64,
                deviation: gauss as f64 - own as f64,
            });
        }
    }
    let max_abs_deviation = entries.iter().map(|e| e.deviation.abs()).fold(0.0, f64::max);
    let matched_through = entries
        .iter()
        .find(|e| e.deviation != 0.0)
        .map_or(q, |e| e.order - 1);
    Ok(MomentMatchReport {
        innovation: dist,
        noise_dim,
        max_order: q,
        entries,
        max_abs_deviation,
        matched_through,
    })
}

/// All exponent vectors of length n summing to `total`, in lexicographic order.
fn compositions(total: u32, n: usize) -> Vec<Vec<u32>> {
    fn rec(rest: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=rest).rev() {
            prefix.push(k);
            rec(rest - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, n, &mut Vec::with_capacity(n), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Number of perfect matchings of a multiset of coordinate labels whose pairs
    /// share a label, counted by brute force.
    fn pairings(labels: &mut Vec<usize>) -> u64 {
        if labels.is_empty() {
            return 1;
        }
        let first = labels.remove(0);
        let mut count = 0;
        for i in 0..labels.len() {
            if labels[i] == first {
                let other = labels.remove(i);
                count += pairings(labels);
                labels.insert(i, other);
            }
        }
        labels.insert(0, first);
        count
    }

    #[test]
    fn gaussian_moments_match_isserlis_pairings() {
        let r = moment_match_report(InnovationDist::Gaussian, 3, 6).unwrap();
        for e in &r.entries {
            let mut labels: Vec<usize> = e
                .exponents
                .iter()
                .enumerate()
                .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
                .collect();
            assert_eq!(e.gaussian_moment, pairings(&mut labels) as f64, "{:?}", e.exponents);
        }
        assert_eq!(r.max_abs_deviation, 0.0);
        assert_eq!(r.matched_through, 6);
    }

    #[test]
    fn discrete_laws() {
        let r = moment_match_report(InnovationDist::ThreePoint, 2, 5).unwrap();
        assert_eq!(r.max_abs_deviation, 0.0);
        let r = moment_match_report(InnovationDist::ThreePoint, 1, 6).unwrap();
        assert_eq!(r.matched_through, 5);
        let r = moment_match_report(InnovationDist::Rademacher, 1, 3).unwrap();
        assert_eq!(r.max_abs_deviation, 0.0);
        let r = moment_match_report(InnovationDist::Rademacher, 1, 4).unwrap();
        let fourth = r.entries.iter().find(|e| e.exponents == [4]).unwrap();
        assert_eq!((fourth.gaussian_moment, fourth.innovation_moment), (3.0, 1.0));
        assert_eq!(fourth.deviation, 2.0);
        assert_eq!(r.matched_through, 3);
    }

    #[test]
    fn moments_agree_with_atom_sums() {
        for dist in [InnovationDist::Rademacher, InnovationDist::ThreePoint] {
            for k in 0..=8 {
                let by_atoms: f64 = dist
                    .support()
                    .unwrap()
                    .iter()
                    .map(|(x, p)| p * x.powi(k as i32))
                    .sum();
                let exact = coordinate_moment(dist, k) as f64;
                assert!((by_atoms - exact).abs() <= 1e-12 * exact.max(1.0), "{dist} {k}");
            }
        }
    }

    #[test]
    fn composition_count() {
        // C(k + n − 1, n − 1)
        assert_eq!(compositions(4, 3).len(), 15);
        assert_eq!(compositions(6, 2).len(), 7);
        assert!(moment_match_report(InnovationDist::Gaussian, 1, 0).is_err());
        assert!(moment_match_report(InnovationDist::Gaussian, 1, 7).is_err());
    }
}
