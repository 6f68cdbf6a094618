//! Innovation laws U, the Lévy-area surrogate 𝒲, and exact enumeration of (U, κ).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Cap on the number of enumerated outcomes.
pub const ENUMERATION_CAP: u64 = 1_000_000;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

const RADEMACHER: [(f64, f64); 2] = [(-1.0, 0.5), (1.0, 0.5)];
const THREE_POINT: [(f64, f64); 3] = [(-SQRT_3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (SQRT_3, 1.0 / 6.0)];
const KAPPA: [(f64, f64); 2] = [(-0.5, 0.5), (0.5, 0.5)];

/// Per-trajectory random stream keyed by (master seed, replication index).
pub type RngStream = ChaCha8Rng;

pub fn rng_stream(master_seed: u64, replication: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication);
    rng
}

/// Law of each (independent) coordinate of U.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationDist {
    Gaussian,
    /// ±1 with probability ½.
    Rademacher,
    /// {−√3, 0, √3} with probabilities {1/6, 2/3, 1/6}.
    ThreePoint,
}

impl InnovationDist {
    pub fn name(self) -> &'static str {
        match self {
            InnovationDist::Gaussian => "gaussian",
            InnovationDist::Rademacher => "rademacher",
            InnovationDist::ThreePoint => "three_point",
        }
    }

    /// Highest q with normal moments matched through order q (None = all orders).
    pub fn matching_order(self) -> Option<usize> {
        match self {
            InnovationDist::Gaussian => None,
            InnovationDist::Rademacher => Some(3),
            InnovationDist::ThreePoint => Some(5),
        }
    }

    /// Atoms (value, probability) of one coordinate, None for the Gaussian.
    pub fn support(self) -> Option<&'static [(f64, f64)]> {
        match self {
            InnovationDist::Gaussian => None,
            InnovationDist::Rademacher => Some(&RADEMACHER),
            InnovationDist::ThreePoint => Some(&THREE_POINT),
        }
    }

    /// Closed-form E[X^k] of one coordinate.
    pub fn moment(self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        let half = k / 2;
        match self {
            // (k − 1)!!
            InnovationDist::Gaussian => (1..=half).map(|j| (2 * j - 1) as f64).product(),
            InnovationDist::Rademacher => 1.0,
            InnovationDist::ThreePoint if k == 0 => 1.0,
            InnovationDist::ThreePoint => 3f64.powi(half as i32 - 1),
        }
    }

    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(self, rng: &mut R, out: &mut [f64]) {
        match self {
            InnovationDist::Gaussian => {
                for o in out {
                    *o = rng.sample(StandardNormal);
                }
            }
            InnovationDist::Rademacher => {
                for o in out {
                    *o = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            InnovationDist::ThreePoint => {
                for o in out {
                    *o = match rng.random_range(0..6u32) {
                        0 => -SQRT_3,
                        5 => SQRT_3,
                        _ => 0.0,
                    };
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut u = vec![0.0; n];
        self.sample_into(rng, &mut u);
        u
    }
}

impl fmt::Display for InnovationDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InnovationDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(InnovationDist::Gaussian),
            "rademacher" => Ok(InnovationDist::Rademacher),
            "three_point" => Ok(InnovationDist::ThreePoint),
            other => Err(Error::InvalidParameter(format!("unknown innovation '{other}'"))),
        }
    }
}

/// One realization of 𝒲 (row-major N × N, symmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct LevyAreaSurrogate {
    n: usize,
    w: Vec<f64>,
}

impl LevyAreaSurrogate {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            w: vec![0.0; n * n],
        }
    }

    /// 𝒲^{ii} = u_i² − 1, 𝒲^{ij} = u_i u_j − κ^{i∧j,i∨j}; `kappa` lists κ^{ij}
    /// for i < j in row-major order.
    pub fn from_parts(u: &[f64], kappa: &[f64]) -> Result<Self> {
        let n = u.len();
        if kappa.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * n.saturating_sub(1) / 2,
                got: kappa.len(),
            });
        }
        let mut s = Self::zeros(n);
        s.assemble(u, kappa.iter().copied());
        Ok(s)
    }

    /// Draws κ^{ij} ∈ {−½, ½} for i < j (row-major) and assembles 𝒲.
    pub fn sample<R: Rng + ?Sized>(u: &[f64], rng: &mut R) -> Self {
        let mut s = Self::zeros(u.len());
        s.resample(u, rng);
        s
    }

    #[inline]
    pub fn resample<R: Rng + ?Sized>(&mut self, u: &[f64], rng: &mut R) {
        let n = self.n;
        for i in 0..n {
            self.w[i * n + i] = u[i] * u[i] - 1.0;
            for j in i + 1..n {
                let kappa = if rng.random::<bool>() { 0.5 } else { -0.5 };
                let v = u[i] * u[j] - kappa;
                self.w[i * n + j] = v;
                self.w[j * n + i] = v;
            }
        }
    }

    fn assemble(&mut self, u: &[f64], mut kappa: impl Iterator<Item = f64>) {
        let n = self.n;
        for i in 0..n {
            self.w[i * n + i] = u[i] * u[i] - 1.0;
            for j in i + 1..n {
                let v = u[i] * u[j] - kappa.next().unwrap_or(0.0);
                self.w[i * n + j] = v;
                self.w[j * n + i] = v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// One atom of the joint law of (U, 𝒲).
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub u: Vec<f64>,
    pub w: LevyAreaSurrogate,
}

fn outcome_count(atoms: usize, n_w: usize, with_kappa: bool) -> u128 {
    let mut count = (atoms as u128).saturating_pow(n_w as u32);
    if with_kappa {
        let pairs = (n_w * n_w.saturating_sub(1) / 2) as u32;
        count = count.saturating_mul(2u128.saturating_pow(pairs));
    }
    count
}

/// Every outcome of (U, κ) with its probability. With `with_kappa = false` the
/// κ variables are not enumerated and 𝒲 uses κ = 0 off the diagonal.
pub fn enumerate_outcomes(
    dist: InnovationDist,
    n_w: usize,
    with_kappa: bool,
) -> Result<Vec<Outcome>> {
    let atoms = dist.support().ok_or(Error::NotEnumerable("gaussian"))?;
    enumerate_atoms(atoms, n_w, with_kappa)
}

/// Same as [`enumerate_outcomes`] for an arbitrary one-coordinate atom list.
pub(crate) fn enumerate_atoms(
    atoms: &[(f64, f64)],
    n_w: usize,
    with_kappa: bool,
) -> Result<Vec<Outcome>> {
    let count = outcome_count(atoms.len(), n_w, with_kappa);
    if count > ENUMERATION_CAP as u128 {
        return Err(Error::EnumerationTooLarge {
            outcomes: count,
            cap: ENUMERATION_CAP,
        });
    }
    let pairs = if with_kappa {
        n_w * n_w.saturating_sub(1) / 2
    } else {
        0
    };
    let mut out = Vec::with_capacity(count as usize);
    let mut u_idx = vec![0usize; n_w];
    let mut u = vec![0.0; n_w];
    let mut kappa = vec![0.0; n_w * n_w.saturating_sub(1) / 2];
    loop {
        let mut p_u = 1.0;
        for (slot, &i) in u.iter_mut().zip(&u_idx) {
            *slot = atoms[i].0;
            p_u *= atoms[i].1;
        }
        for kmask in 0u64..(1u64 << pairs) {
            let mut p = p_u;
            for (b, k) in kappa.iter_mut().enumerate().take(pairs) {
                let atom = KAPPA[((kmask >> b) & 1) as usize];
                *k = atom.0;
                p *= atom.1;
            }
            let mut w = LevyAreaSurrogate::zeros(n_w);
            w.assemble(&u, kappa.iter().copied());
            out.push(Outcome {
                prob: p,
                u: u.clone(),
                w,
            });
        }
        let mut k = 0;
        loop {
            if k == n_w {
                let total: CompensatedSum = out.iter().map(|o| o.prob).collect();
                if (total.value() - 1.0).abs() > 1e-14 {
                    return Err(Error::InvalidParameter(format!(
                        "enumerated probabilities sum to {}",
                        total.value()
                    )));
                }
                return Ok(out);
            }
            u_idx[k] += 1;
            if u_idx[k] < atoms.len() {
                break;
            }
            u_idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        let w = LevyAreaSurrogate::from_parts(&[1.0, 2.0], &[0.5]).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.5, 1.5, 3.0]);
        let w = LevyAreaSurrogate::from_parts(&[1.0], &[]).unwrap();
        assert_eq!(w.as_slice(), &[0.0]);
        let w = LevyAreaSurrogate::from_parts(&[0.0, 0.0], &[-0.5]).unwrap();
        assert_eq!(w.as_slice(), &[-1.0, 0.5, 0.5, -1.0]);
        assert!(LevyAreaSurrogate::from_parts(&[0.0, 0.0], &[]).is_err());
    }

    #[test]
    fn analytic_moments() {
        let tp = InnovationDist::ThreePoint;
        assert_eq!(tp.moment(2), 1.0);
        assert_eq!(tp.moment(4), 3.0);
        assert_eq!(tp.moment(6), 9.0);
        assert_eq!(InnovationDist::Rademacher.moment(4), 1.0);
        assert_eq!(InnovationDist::Gaussian.moment(4), 3.0);
        assert_eq!(InnovationDist::Gaussian.moment(6), 15.0);
        // enumeration agrees with the closed forms
        for dist in [InnovationDist::ThreePoint, InnovationDist::Rademacher] {
            for k in 0..=8 {
                let e: f64 = dist
                    .support()
                    .unwrap()
                    .iter()
                    .map(|(x, p)| p * x.powi(k as i32))
                    .sum();
                assert!((e - dist.moment(k)).abs() <= 1e-14 * dist.moment(k).max(1.0), "{dist} k={k}");
            }
        }
    }

    #[test]
    fn enumeration_counts_and_centering() {
        let all = enumerate_outcomes(InnovationDist::ThreePoint, 2, true).unwrap();
        assert_eq!(all.len(), 9 * 2);
        let mut mean = [0.0; 4];
        for o in &all {
            for (m, w) in mean.iter_mut().zip(o.w.as_slice()) {
                *m += o.prob * w;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 1e-15), "{mean:?}");
        assert!(matches!(
            enumerate_outcomes(InnovationDist::Gaussian, 1, true),
            Err(Error::NotEnumerable(_))
        ));
        assert!(matches!(
            enumerate_outcomes(InnovationDist::ThreePoint, 8, true),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = InnovationDist::Gaussian.sample(&mut rng_stream(7, 0), 5);
        let b = InnovationDist::Gaussian.sample(&mut rng_stream(7, 0), 5);
        let c = InnovationDist::Gaussian.sample(&mut rng_stream(7, 1), 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_moments_within_five_standard_errors() {
        let n = 1_000_000;
        for dist in [
            InnovationDist::Gaussian,
            InnovationDist::Rademacher,
            InnovationDist::ThreePoint,
        ] {
            let mut rng = rng_stream(11, 3);
            let mut u = [0.0];
            let (mut s2, mut s4) = (0.0, 0.0);
            for _ in 0..n {
                dist.sample_into(&mut rng, &mut u);
                s2 += u[0] * u[0];
                s4 += u[0].powi(4);
            }
            let nf = n as f64;
            let se2 = ((dist.moment(4) - 1.0) / nf).sqrt();
            let se4 = ((dist.moment(8) - dist.moment(4).powi(2)) / nf).sqrt();
            assert!((s2 / nf - 1.0).abs() <= 5.0 * se2, "{dist}");
            if se4 > 0.0 {
                assert!((s4 / nf - dist.moment(4)).abs() < 5.0 * se4, "{dist}");
            }
        }
    }
}
