//! Online accumulator of ν_n^η(f) = Σ η_k f(X̄_{k−1}) / H_n.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::law::AnalyticLaw1D;
use super::wasserstein::wasserstein1_atoms_to_law;
use crate::error::{Error, Result};
use crate::model::Observable;
use crate::schedules::ScheduleRecord;
use crate::schemes::StateSink;
use crate::sum::CompensatedSum;

/// Which schedule entry a measure uses as its weight when driven as a sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSource {
    /// η_k from the weight schedule.
    #[default]
    Eta,
    /// γ_k from the step schedule.
    Step,
}

#[derive(Debug, Clone)]
struct Decimated {
    capacity: usize,
    stride: u64,
    /// (atom index, state, weight)
    atoms: Vec<(u64, Vec<f64>, f64)>,
}

impl Decimated {
    fn push(&mut self, index: u64, x: &[f64], w: f64) {
        if (index - 1) % self.stride != 0 {
            return;
        }
        self.atoms.push((index, x.to_vec(), w));
        while self.atoms.len() > self.capacity {
            self.stride *= 2;
            let stride = self.stride;
            self.atoms.retain(|(i, _, _)| (i - 1) % stride == 0);
        }
    }
}

/// Weighted empirical measure of pre-step states.
#[derive(Clone)]
pub struct WeightedEmpiricalMeasure {
    dim: usize,
    names: Vec<String>,
    observables: Vec<Arc<dyn Observable>>,
    sums: Vec<CompensatedSum>,
    h: CompensatedSum,
    n: u64,
    seen: u64,
    burn_in: u64,
    source: WeightSource,
    buffer: Option<Decimated>,
    trajectory: Option<Vec<(Vec<f64>, f64)>>,
}

impl fmt::Debug for WeightedEmpiricalMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightedEmpiricalMeasure")
            .field("dim", &self.dim)
            .field("observables", &self.names)
            .field("n", &self.n)
            .field("h_n", &self.h.value())
            .field("source", &self.source)
            .finish()
    }
}

impl WeightedEmpiricalMeasure {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            names: Vec::new(),
            observables: Vec::new(),
            sums: Vec::new(),
            h: CompensatedSum::new(),
            n: 0,
            seen: 0,
            burn_in: 0,
            source: WeightSource::Eta,
            buffer: None,
            trajectory: None,
        }
    }

    pub fn with_weight_source(mut self, source: WeightSource) -> Self {
        self.source = source;
        self
    }

    /// Keeps every ⌈expected_n / capacity⌉-th atom, doubling the stride whenever
    /// the buffer would exceed `capacity`.
    pub fn with_buffer(mut self, capacity: usize, expected_n: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("buffer capacity must be >= 1".into()));
        }
        let stride = expected_n.div_ceil(capacity as u64).max(1);
        self.buffer = Some(Decimated {
            capacity,
            stride,
            atoms: Vec::new(),
        });
        Ok(self)
    }

    /// Stores every recorded (state, weight) pair.
    pub fn with_trajectory_log(mut self) -> Self {
        self.trajectory = Some(Vec::new());
        self
    }

    /// Ignores the first `k` calls to `record`.
    pub fn with_burn_in(mut self, k: u64) -> Self {
        self.burn_in = k;
        self
    }

    pub fn register(&mut self, name: &str, f: Arc<dyn Observable>) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::DuplicateObservable(name.to_string()));
        }
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.dim(),
            });
        }
        self.names.push(name.to_string());
        self.observables.push(f);
        self.sums.push(CompensatedSum::new());
        Ok(())
    }

    /// Adds the atom `eta · δ_x`.
    pub fn record(&mut self, x: &[f64], eta: f64) -> Result<()> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::NegativeWeight(eta));
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.seen += 1;
        if self.seen <= self.burn_in {
            return Ok(());
        }
        self.n += 1;
        if eta > 0.0 {
            self.h.add(eta);
            for (s, f) in self.sums.iter_mut().zip(&self.observables) {
                s.add(eta * f.value(x));
            }
        }
        if let Some(buf) = &mut self.buffer {
            buf.push(self.n, x, eta);
        }
        if let Some(log) = &mut self.trajectory {
            log.push((x.to_vec(), eta));
        }
        Ok(())
    }

    pub fn value(&self, name: &str) -> Result<f64> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownObservable(name.to_string()))?;
        let h = self.h_n()?;
        Ok(self.sums[i].value() / h)
    }

    /// (name, value) for every registered observable, in registration order.
    pub fn values(&self) -> Result<Vec<(String, f64)>> {
        let h = self.h_n()?;
        Ok(self
            .names
            .iter()
            .zip(&self.sums)
            .map(|(n, s)| (n.clone(), s.value() / h))
            .collect())
    }

    fn h_n(&self) -> Result<f64> {
        let h = self.h.value();
        if self.n == 0 || h <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(h)
    }

    pub fn total_weight(&self) -> f64 {
        self.h.value()
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Clears all sums, the buffer and the log; registrations are kept.
    pub fn reset(&mut self) {
        self.sums.iter_mut().for_each(CompensatedSum::reset);
        self.h.reset();
        self.n = 0;
        self.seen = 0;
        if let Some(buf) = &mut self.buffer {
            buf.atoms.clear();
        }
        if let Some(log) = &mut self.trajectory {
            log.clear();
        }
    }

    /// Decimated (state, weight) atoms.
    pub fn buffer(&self) -> Option<Vec<(&[f64], f64)>> {
        self.buffer
            .as_ref()
            .map(|b| b.atoms.iter().map(|(_, x, w)| (x.as_slice(), *w)).collect())
    }

    pub fn trajectory(&self) -> Option<&[(Vec<f64>, f64)]> {
        self.trajectory.as_deref()
    }

    /// W₁ between the buffered atoms and `law` (d = 1 only).
    pub fn wasserstein1_to(&self, law: &AnalyticLaw1D) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        let buf = self
            .buffer
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("sample buffer is disabled".into()))?;
        if buf.atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let atoms: Vec<(f64, f64)> = buf.atoms.iter().map(|(_, x, w)| (x[0], *w)).collect();
        wasserstein1_atoms_to_law(&atoms, law)
    }

    /// CSV `name,value,H_n,n`.
    pub fn export_snapshot_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["name", "value", "H_n", "n"])
            .map_err(|e| csv_error(path, e))?;
        let h = self.h.value();
        for (name, s) in self.names.iter().zip(&self.sums) {
            let value = if self.n == 0 || h <= 0.0 {
                f64::NAN
            } else {
                s.value() / h
            };
            w.write_record([
                name.clone(),
                value.to_string(),
                h.to_string(),
                self.n.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// CSV `state…,weight` (header `state` for d = 1, `state_1 … state_d` otherwise).
    pub fn export_buffer_csv(&self, path: &Path) -> Result<()> {
        let buf = self
            .buffer
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("sample buffer is disabled".into()))?;
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header: Vec<String> = if self.dim == 1 {
            vec!["state".into()]
        } else {
            (1..=self.dim).map(|i| format!("state_{i}")).collect()
        };
        header.push("weight".into());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (_, x, weight) in &buf.atoms {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(weight.to_string());
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{other:?}")),
    }
}

impl StateSink for WeightedEmpiricalMeasure {
    #[inline]
    fn record(&mut self, rec: &ScheduleRecord, state: &[f64]) -> Result<()> {
        let w = match self.source {
            WeightSource::Eta => rec.eta,
            WeightSource::Step => rec.gamma,
        };
        WeightedEmpiricalMeasure::record(self, state, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Monomial;

    fn measure() -> WeightedEmpiricalMeasure {
        let mut m = WeightedEmpiricalMeasure::new(1);
        m.register("x", Arc::new(Monomial::power(1))).unwrap();
        m.register("x^2", Arc::new(Monomial::power(2))).unwrap();
        m
    }

    #[test]
    fn record_examples() {
        let mut m = measure();
        assert!(matches!(m.value("x"), Err(Error::EmptyMeasure)));
        m.record(&[2.0], 1.0).unwrap();
        assert_eq!(m.value("x^2").unwrap(), 4.0);
        m.record(&[100.0], 0.0).unwrap();
        assert_eq!(m.value("x^2").unwrap(), 4.0);

        let mut m = measure();
        m.record(&[0.0], 1.0).unwrap();
        m.record(&[2.0], 3.0).unwrap();
        assert_eq!(m.value("x").unwrap(), 1.5);
        assert!(matches!(m.record(&[0.0], -1.0), Err(Error::NegativeWeight(_))));
        assert!(matches!(m.value("y"), Err(Error::UnknownObservable(_))));
        m.reset();
        assert!(matches!(m.value("x"), Err(Error::EmptyMeasure)));
        assert!(matches!(
            m.register("x", Arc::new(Monomial::power(3))),
            Err(Error::DuplicateObservable(_))
        ));
    }

    #[test]
    fn burn_in_skips_leading_atoms() {
        let mut m = measure().with_burn_in(2);
        for (x, w) in [(10.0, 1.0), (20.0, 1.0), (1.0, 1.0), (3.0, 1.0)] {
            m.record(&[x], w).unwrap();
        }
        assert_eq!(m.value("x").unwrap(), 2.0);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn decimation_keeps_capacity_and_stride() {
        let mut m = measure().with_buffer(10, 100).unwrap();
        for k in 0..1000 {
            m.record(&[k as f64], 1.0).unwrap();
        }
        let buf = m.buffer().unwrap();
        assert!(buf.len() <= 10 && buf.len() >= 5, "{}", buf.len());
        // the kept atoms are evenly strided from the first one
        let xs: Vec<f64> = buf.iter().map(|(x, _)| x[0]).collect();
        let stride = xs[1] - xs[0];
        assert!(xs.windows(2).all(|w| w[1] - w[0] == stride));
        assert_eq!(xs[0], 0.0);
    }

    #[test]
    fn csv_exports() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = measure().with_buffer(4, 4).unwrap();
        m.record(&[0.5], 0.25).unwrap();
        m.record(&[1.5], 0.75).unwrap();
        let snap = dir.path().join("snap.csv");
        m.export_snapshot_csv(&snap).unwrap();
        let text = std::fs::read_to_string(&snap).unwrap();
        assert_eq!(text, "name,value,H_n,n\nx,1.25,1,2\nx^2,1.75,1,2\n");
        let buf = dir.path().join("buf.csv");
        m.export_buffer_csv(&buf).unwrap();
        let text = std::fs::read_to_string(&buf).unwrap();
        assert_eq!(text, "state,weight\n0.5,0.25\n1.5,0.75\n");
        let missing = dir.path().join("no/such/dir.csv");
        assert!(matches!(m.export_snapshot_csv(&missing), Err(Error::Io { .. })));
    }

    #[test]
    fn wasserstein_requires_one_dimension_and_buffer() {
        let law = AnalyticLaw1D::normal(0.0, 1.0).unwrap();
        let m = WeightedEmpiricalMeasure::new(2);
        assert!(matches!(m.wasserstein1_to(&law), Err(Error::UnsupportedDimension(2))));
        let mut m = measure().with_buffer(8, 8).unwrap();
        assert!(matches!(m.wasserstein1_to(&law), Err(Error::EmptyMeasure)));
        m.record(&[0.0], 1.0).unwrap();
        let w = m.wasserstein1_to(&law).unwrap();
        assert!((w - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
    }
}
