//! Cross-replication summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// g₁ = m₃ / m₂^{3/2} (0 for constant samples).
    pub skewness: f64,
    /// g₂ = m₄ / m₂² − 3 (0 for constant samples).
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    /// √(6/n)
    pub se_skewness: f64,
    /// √(24/n)
    pub se_kurtosis: f64,
}

pub fn merge_statistics(values: &[f64]) -> Result<SummaryStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, got: n });
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite sample {bad}")));
    }
    let nf = n as f64;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / nf;
    let (mut m2, mut m3, mut m4) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2.add(d2);
        m3.add(d2 * d);
        m4.add(d2 * d2);
    }
    let (m2, m3, m4) = (m2.value() / nf, m3.value() / nf, m4.value() / nf);
    let variance = m2 * nf / (nf - 1.0);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(SummaryStats {
        n,
        mean,
        variance,
        skewness,
        excess_kurtosis,
        se_mean: (variance / nf).sqrt(),
        se_skewness: (6.0 / nf).sqrt(),
        se_kurtosis: (24.0 / nf).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn examples() {
        let s = merge_statistics(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 0.0));
        let s = merge_statistics(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance), (1.0, 2.0));
        assert!(merge_statistics(&[1.0]).is_err());
    }

    #[test]
    fn normal_draws_have_small_shape_statistics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = merge_statistics(&xs).unwrap();
        assert!(s.skewness.abs() < 0.08, "{}", s.skewness);
        assert!(s.excess_kurtosis.abs() < 0.15, "{}", s.excess_kurtosis);
        assert!((s.se_skewness - 0.024494897).abs() < 1e-8);
    }
}
