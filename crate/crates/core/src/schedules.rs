//! Step sequences (γ_n, Γ_n) and weight sequences (η_n, H_n).
//!
//! Both schedules evaluate the per-index term in closed form; partial sums are
//! accumulated with compensated summation and cached at block boundaries so that
//! random access and forward iteration produce bit-identical values.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

const BLOCK: u64 = 256;

/// Prefix sums cached every `BLOCK` indices. The stored accumulator state lets a
/// lookup resume exactly where a full forward pass would be.
#[derive(Debug, Default)]
struct PrefixCache {
    // checkpoints[b] = accumulator after summing terms 1..=b*BLOCK
    checkpoints: Vec<CompensatedSum>,
}

impl PrefixCache {
    fn get(&mut self, n: u64, term: impl Fn(u64) -> f64) -> f64 {
        if self.checkpoints.is_empty() {
            self.checkpoints.push(CompensatedSum::new());
        }
        let block = (n / BLOCK) as usize;
        while self.checkpoints.len() <= block {
            let b = self.checkpoints.len() as u64 - 1;
            let mut acc = *self.checkpoints.last().unwrap();
            for k in b * BLOCK + 1..=(b + 1) * BLOCK {
                acc.add(term(k));
            }
            self.checkpoints.push(acc);
        }
        let mut acc = self.checkpoints[block];
        for k in block as u64 * BLOCK + 1..=n {
            acc.add(term(k));
        }
        acc.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    PowerLaw,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub kind: StepKind,
    pub gamma1: f64,
    #[serde(default)]
    pub xi: f64,
}

/// Step sequence γ_n = γ₁ n^{-ξ} (power law) or γ_n = γ₁ (constant).
///
/// `γ̄ = sup γ_n = γ₁` for both families.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "StepParams", into = "StepParams")]
pub struct StepSchedule {
    params: StepParams,
    cache: Mutex<PrefixCache>,
}

impl Clone for StepSchedule {
    fn clone(&self) -> Self {
        Self {
            params: self.params,
            cache: Mutex::new(PrefixCache::default()),
        }
    }
}

impl PartialEq for StepSchedule {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl TryFrom<StepParams> for StepSchedule {
    type Error = Error;

    fn try_from(params: StepParams) -> Result<Self> {
        match params.kind {
            StepKind::PowerLaw => Self::power_law(params.gamma1, params.xi),
            StepKind::Constant => Self::constant(params.gamma1),
        }
    }
}

impl From<StepSchedule> for StepParams {
    fn from(s: StepSchedule) -> Self {
        s.params
    }
}

impl StepSchedule {
    pub fn power_law(gamma1: f64, xi: f64) -> Result<Self> {
        if !(gamma1 > 0.0 && gamma1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma1 must be positive, got {gamma1}"
            )));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "xi must lie in (0, 1), got {xi}"
            )));
        }
        Ok(Self {
            params: StepParams {
                kind: StepKind::PowerLaw,
                gamma1,
                xi,
            },
            cache: Mutex::default(),
        })
    }

    pub fn constant(gamma1: f64) -> Result<Self> {
        if !(gamma1 > 0.0 && gamma1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma1 must be positive, got {gamma1}"
            )));
        }
        Ok(Self {
            params: StepParams {
                kind: StepKind::Constant,
                gamma1,
                xi: 0.0,
            },
            cache: Mutex::default(),
        })
    }

    pub fn params(&self) -> StepParams {
        self.params
    }

    pub fn kind(&self) -> StepKind {
        self.params.kind
    }

    pub fn gamma1(&self) -> f64 {
        self.params.gamma1
    }

    /// Power-law exponent; `None` for constant steps.
    pub fn xi(&self) -> Option<f64> {
        match self.params.kind {
            StepKind::PowerLaw => Some(self.params.xi),
            StepKind::Constant => None,
        }
    }

    pub fn gamma_bar(&self) -> f64 {
        self.params.gamma1
    }

    /// γ_n, n ≥ 1.
    pub fn gamma(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroIndex(n));
        }
        Ok(self.term(n))
    }

    /// γ_n with the convention γ_0 = 0.
    #[inline]
    pub(crate) fn term(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self.params.kind {
            StepKind::PowerLaw => self.params.gamma1 * (n as f64).powf(-self.params.xi),
            StepKind::Constant => self.params.gamma1,
        }
    }

    /// Γ_n = γ_1 + … + γ_n, Γ_0 = 0.
    pub fn big_gamma(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        cache.get(n, |k| self.term(k))
    }

    /// Forward iterator over (k, γ_k, Γ_k) for k = 1, 2, …
    pub fn cursor(&self) -> StepCursor<'_> {
        StepCursor {
            schedule: self,
            k: 0,
            acc: CompensatedSum::new(),
        }
    }
}

#[derive(Debug)]
pub struct StepCursor<'a> {
    schedule: &'a StepSchedule,
    k: u64,
    acc: CompensatedSum,
}

impl Iterator for StepCursor<'_> {
    type Item = (u64, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        self.k += 1;
        let g = self.schedule.term(self.k);
        self.acc.add(g);
        Some((self.k, g, self.acc.value()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightKind {
    /// η_n = C γ_n
    Proportional,
    /// η_n = C (γ_{n-1} + γ_n) / 2 with γ_0 = 0
    Trapezoidal,
    /// η_n = γ_n^r (C unused)
    Power { r: f64 },
}

/// Weight sequence (η_n) built on a reference step schedule.
#[derive(Debug)]
pub struct WeightSchedule {
    kind: WeightKind,
    c: f64,
    step: StepSchedule,
    cache: Mutex<PrefixCache>,
}

impl Clone for WeightSchedule {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            c: self.c,
            step: self.step.clone(),
            cache: Mutex::default(),
        }
    }
}

impl WeightSchedule {
    pub fn new(kind: WeightKind, c: f64, step: StepSchedule) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight constant C must be positive, got {c}"
            )));
        }
        if let WeightKind::Power { r } = kind {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight exponent r must be finite and >= 0, got {r}"
                )));
            }
        }
        Ok(Self {
            kind,
            c,
            step,
            cache: Mutex::default(),
        })
    }

    pub fn proportional(c: f64, step: StepSchedule) -> Result<Self> {
        Self::new(WeightKind::Proportional, c, step)
    }

    pub fn trapezoidal(c: f64, step: StepSchedule) -> Result<Self> {
        Self::new(WeightKind::Trapezoidal, c, step)
    }

    pub fn power(r: f64, step: StepSchedule) -> Result<Self> {
        Self::new(WeightKind::Power { r }, 1.0, step)
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn step(&self) -> &StepSchedule {
        &self.step
    }

    /// η_n, n ≥ 1.
    pub fn eta(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroIndex(n));
        }
        Ok(self.term(n))
    }

    #[inline]
    fn term(&self, n: u64) -> f64 {
        let g = self.step.term(n);
        match self.kind {
            WeightKind::Proportional => self.c * g,
            WeightKind::Trapezoidal => self.c * (self.step.term(n - 1) + g) / 2.0,
            WeightKind::Power { r } => g.powf(r),
        }
    }

    /// H_n = η_1 + … + η_n.
    pub fn big_h(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroIndex(n));
        }
        Ok(self.big_h_unchecked(n))
    }

    fn big_h_unchecked(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self.kind {
            WeightKind::Proportional => self.c * self.step.big_gamma(n),
            _ => {
                let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
                cache.get(n, |k| self.term(k))
            }
        }
    }

    /// Forward iterator over [`ScheduleRecord`]s for k = 1, 2, …
    pub fn cursor(&self) -> ScheduleCursor<'_> {
        ScheduleCursor {
            weights: self,
            k: 0,
            gamma_acc: CompensatedSum::new(),
            h_acc: CompensatedSum::new(),
        }
    }
}

/// One index of a joint step/weight schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleRecord {
    pub k: u64,
    pub gamma: f64,
    pub big_gamma: f64,
    pub eta: f64,
    pub big_h: f64,
}

#[derive(Debug)]
pub struct ScheduleCursor<'a> {
    weights: &'a WeightSchedule,
    k: u64,
    gamma_acc: CompensatedSum,
    h_acc: CompensatedSum,
}

impl Iterator for ScheduleCursor<'_> {
    type Item = ScheduleRecord;

    fn next(&mut self) -> Option<ScheduleRecord> {
        self.k += 1;
        let k = self.k;
        let gamma = self.weights.step.term(k);
        self.gamma_acc.add(gamma);
        let big_gamma = self.gamma_acc.value();
        let eta = self.weights.term(k);
        let big_h = match self.weights.kind {
            WeightKind::Proportional => self.weights.c * big_gamma,
            _ => {
                self.h_acc.add(eta);
                self.h_acc.value()
            }
        };
        Some(ScheduleRecord {
            k,
            gamma,
            big_gamma,
            eta,
            big_h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(g1: f64, xi: f64) -> StepSchedule {
        StepSchedule::power_law(g1, xi).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let s = pl(1.0, 1.0 / 3.0);
        assert_eq!(s.gamma(1).unwrap(), 1.0);
        assert!((s.gamma(8).unwrap() - 0.5).abs() < 1e-15);
        let c = StepSchedule::constant(0.01).unwrap();
        assert_eq!(c.gamma(999).unwrap(), 0.01);
        assert!(matches!(s.gamma(0), Err(Error::ZeroIndex(0))));
    }

    #[test]
    fn big_gamma_examples() {
        let c = StepSchedule::constant(0.1).unwrap();
        assert_eq!(c.big_gamma(0), 0.0);
        assert!((c.big_gamma(10) - 1.0).abs() < 1e-15);

        // exact summation vs (3/2) n^{2/3}
        let s = pl(1.0, 1.0 / 3.0);
        let n = 1_000_000u64;
        let exact: f64 = (1..=n).map(|k| (k as f64).powf(-1.0 / 3.0)).sum();
        assert!((s.big_gamma(n) - exact).abs() < 1e-6 * exact);
        let asym = 1.5 * (n as f64).powf(2.0 / 3.0);
        assert!((s.big_gamma(n) - asym).abs() < 0.01 * asym);
    }

    #[test]
    fn eta_examples() {
        let c = StepSchedule::constant(0.1).unwrap();
        let w = WeightSchedule::trapezoidal(1.0, c).unwrap();
        assert!((w.eta(1).unwrap() - 0.05).abs() < 1e-16);
        assert!((w.eta(5).unwrap() - 0.1).abs() < 1e-16);
        let p = WeightSchedule::power(2.0, pl(1.0, 1.0 / 3.0)).unwrap();
        assert!((p.eta(8).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn big_h_examples() {
        let h = 0.1;
        let w = WeightSchedule::trapezoidal(1.0, StepSchedule::constant(h).unwrap()).unwrap();
        for n in [1u64, 2, 10, 1000] {
            assert!((w.big_h(n).unwrap() - h * (n as f64 - 0.5)).abs() < 1e-12);
        }
        let s = pl(1.0, 0.4);
        let p = WeightSchedule::proportional(1.0, s.clone()).unwrap();
        for n in [1u64, 17, 5000] {
            assert_eq!(p.big_h(n).unwrap(), s.big_gamma(n));
        }
        let q = WeightSchedule::power(2.0, pl(1.0, 1.0 / 3.0)).unwrap();
        let n = 1_000_000u64;
        let asym = 3.0 * (n as f64).powf(1.0 / 3.0);
        assert!((q.big_h(n).unwrap() - asym).abs() < 0.02 * asym);
    }

    #[test]
    fn cursor_matches_random_access_bitwise() {
        let w = WeightSchedule::trapezoidal(2.5, pl(0.7, 0.3)).unwrap();
        for rec in w.cursor().take(3000) {
            assert_eq!(rec.big_gamma, w.step().big_gamma(rec.k));
            assert_eq!(rec.big_h, w.big_h(rec.k).unwrap());
            assert_eq!(rec.eta, w.eta(rec.k).unwrap());
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(StepSchedule::power_law(0.0, 0.5).is_err());
        assert!(StepSchedule::power_law(1.0, 1.0).is_err());
        assert!(StepSchedule::constant(-1.0).is_err());
        assert!(WeightSchedule::proportional(0.0, pl(1.0, 0.5)).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = pl(0.5, 0.2);
        let json = serde_json::to_string(&s).unwrap();
        let back: StepSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        assert!(serde_json::from_str::<StepSchedule>(
            r#"{"kind":"power_law","gamma1":1.0,"xi":1.5}"#
        )
        .is_err());
    }
}
