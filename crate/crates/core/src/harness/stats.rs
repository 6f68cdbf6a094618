//! Kolmogorov–Smirnov normality test and log-log slope regression.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Asymptotic KS critical value at level 0.01.
pub const KS_CRITICAL_001: f64 = 1.628;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    /// c(0.01)/√n
    pub critical: f64,
    pub pass: bool,
    pub mean: f64,
    pub variance: f64,
}

/// One-sample KS distance against N(mean, variance).
pub fn ks_normality(samples: &[f64], variance: f64, mean: f64) -> Result<KsResult> {
    if samples.len() < 50 {
        return Err(Error::NotEnoughSamples {
            needed: 50,
            got: samples.len(),
        });
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!("variance must be positive (got {variance})")));
    }
    let law = Normal::new(mean, variance.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut xs = samples.to_vec();
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("NaN sample".into()));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let distance = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let critical = KS_CRITICAL_001 / n.sqrt();
    Ok(KsResult {
        distance,
        critical,
        pass: distance < critical,
        mean,
        variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% t-interval for the slope; None with only two points.
    pub ci: Option<(f64, f64)>,
    pub points: usize,
}

/// Least-squares fit of log y against log x (natural logs).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::NotEnoughSamples {
            needed: 2,
            got: points.len(),
        });
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParameter(format!("log-log fit needs positive values, got {p:?}")));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("log-log fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ci = if points.len() > 2 {
        let rss: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let df = n - 2.0;
        let se = (rss / df / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .inverse_cdf(0.975);
        Some((slope - t * se, slope + t * se))
    } else {
        None
    };
    Ok(SlopeFit {
        slope,
        intercept,
        ci,
        points: points.len(),
    })
}
