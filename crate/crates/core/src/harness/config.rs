//! Experiment configuration read from flat dotted keys.
//!
//! ```toml
//! model.name = "ou1d"
//! model.theta = 1.0
//! model.sigma = 1.4142135623730951
//! scheme = "euler"
//! innovation = "gaussian"
//! step.kind = "power_law"
//! step.gamma1 = 1.0
//! step.xi = 0.3333333333333333
//! weight.kind = "proportional"
//! weight.c = 1.0
//! f = "x^2"
//! n_steps = 100000
//! replications = 200
//! seed = 7
//! checkpoints = [1000, 10000, 100000]
//! ```
//!
//! Further keys: `weight.r` (power weights), `x0`, `burn_in`, `buffer_capacity`,
//! `output.path`, `output.format` (`csv` or `json`). `weight.kind` defaults to
//! proportional for Euler and trapezoidal for Talay.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use toml::Value;

use super::emit::OutputFormat;
use crate::error::{Error, Result};
use crate::model::{Diffusion, ModelSpec, Monomial, Observable};
use crate::schedules::{StepKind, StepSchedule, WeightKind, WeightSchedule};
use crate::schemes::{InnovationDist, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub scheme: Scheme,
    pub innovation: InnovationDist,
    pub step_kind: StepKind,
    pub gamma1: f64,
    pub xi: f64,
    /// None selects the family matching the scheme order.
    pub weight_kind: Option<WeightKind>,
    pub weight_c: f64,
    /// Observable expression, e.g. `x^2` or `x1*x2`.
    pub f: String,
    pub n_steps: u64,
    pub replications: usize,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    pub x0: Option<Vec<f64>>,
    pub burn_in: u64,
    pub buffer_capacity: usize,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Ou1d {
                theta: 1.0,
                sigma: std::f64::consts::SQRT_2,
            },
            scheme: Scheme::Euler,
            innovation: InnovationDist::Gaussian,
            step_kind: StepKind::PowerLaw,
            gamma1: 1.0,
            xi: 1.0 / 3.0,
            weight_kind: None,
            weight_c: 1.0,
            f: "x^2".into(),
            n_steps: 100_000,
            replications: 20,
            seed: 0,
            checkpoints: Vec::new(),
            x0: None,
            burn_in: 0,
            buffer_capacity: 10_000,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("'{key}' must be a number"))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        // allow 1e5-style floats when they are exact integers
        Value::Float(x) if *x >= 0.0 && x.fract() == 0.0 && *x < 2f64.powi(63) => Ok(*x as u64),
        _ => Err(Error::Config(format!("'{key}' must be a non-negative integer"))),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("'{key}' must be a string")))
}

fn as_vec_f64(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect(),
        _ => Err(Error::Config(format!("'{key}' must be an array of numbers"))),
    }
}

fn as_matrix(key: &str, v: &Value) -> Result<Vec<Vec<f64>>> {
    match v {
        Value::Array(rows) => rows.iter().map(|r| as_vec_f64(key, r)).collect(),
        _ => Err(Error::Config(format!("'{key}' must be an array of rows"))),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        Self::from_pairs(flat)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn from_pairs(mut flat: BTreeMap<String, Value>) -> Result<Self> {
        let mut cfg = Self::default();
        let model_name = match flat.remove("model.name") {
            Some(v) => as_str("model.name", &v)?.to_string(),
            None => "ou1d".into(),
        };
        let theta = flat.remove("model.theta");
        let sigma = flat.remove("model.sigma");
        cfg.model = match model_name.as_str() {
            "ou1d" => ModelSpec::Ou1d {
                theta: theta.map_or(Ok(1.0), |v| as_f64("model.theta", &v))?,
                sigma: sigma.map_or(Ok(std::f64::consts::SQRT_2), |v| as_f64("model.sigma", &v))?,
            },
            "double_well" => {
                if theta.is_some() {
                    return Err(Error::UnknownKey("model.theta".into()));
                }
                ModelSpec::DoubleWell {
                    sigma: sigma.map_or(Ok(1.0), |v| as_f64("model.sigma", &v))?,
                }
            }
            "ou_nd" => ModelSpec::OuNd {
                theta: as_matrix(
                    "model.theta",
                    &theta.ok_or_else(|| Error::Config("ou_nd needs model.theta".into()))?,
                )?,
                sigma: as_matrix(
                    "model.sigma",
                    &sigma.ok_or_else(|| Error::Config("ou_nd needs model.sigma".into()))?,
                )?,
            },
            other => return Err(Error::Config(format!("unknown model '{other}'"))),
        };
        let mut weight_r = None;
        let mut weight_kind = None;
        let mut output_format = None;
        for (key, v) in flat {
            match key.as_str() {
                "scheme" => cfg.scheme = as_str(&key, &v)?.parse()?,
                "innovation" => cfg.innovation = as_str(&key, &v)?.parse()?,
                "step.kind" => {
                    cfg.step_kind = match as_str(&key, &v)? {
                        "power_law" => StepKind::PowerLaw,
                        "constant" => StepKind::Constant,
                        other => return Err(Error::Config(format!("unknown step.kind '{other}'"))),
                    }
                }
                "step.gamma1" => cfg.gamma1 = as_f64(&key, &v)?,
                "step.xi" => cfg.xi = as_f64(&key, &v)?,
                "weight.kind" => weight_kind = Some(as_str(&key, &v)?.to_string()),
                "weight.c" => cfg.weight_c = as_f64(&key, &v)?,
                "weight.r" => weight_r = Some(as_f64(&key, &v)?),
                "f" => cfg.f = as_str(&key, &v)?.to_string(),
                "n_steps" => cfg.n_steps = as_u64(&key, &v)?,
                "replications" => cfg.replications = as_u64(&key, &v)? as usize,
                "seed" => cfg.seed = as_u64(&key, &v)?,
                "checkpoints" => {
                    cfg.checkpoints = match &v {
                        Value::Array(a) => a.iter().map(|x| as_u64(&key, x)).collect::<Result<_>>()?,
                        _ => return Err(Error::Config("'checkpoints' must be an array".into())),
                    }
                }
                "x0" => cfg.x0 = Some(as_vec_f64(&key, &v)?),
                "burn_in" => cfg.burn_in = as_u64(&key, &v)?,
                "buffer_capacity" => cfg.buffer_capacity = as_u64(&key, &v)? as usize,
                "output.path" => cfg.output_path = Some(PathBuf::from(as_str(&key, &v)?)),
                "output.format" => output_format = Some(as_str(&key, &v)?.parse()?),
                _ => return Err(Error::UnknownKey(key)),
            }
        }
        cfg.weight_kind = match (weight_kind.as_deref(), weight_r) {
            (None, None) => None,
            (Some("proportional"), None) => Some(WeightKind::Proportional),
            (Some("trapezoidal"), None) => Some(WeightKind::Trapezoidal),
            (Some("power"), Some(r)) => Some(WeightKind::Power { r }),
            (Some("power"), None) => {
                return Err(Error::Config("power weights need weight.r".into()))
            }
            (_, Some(_)) => return Err(Error::Config("weight.r is only used by power weights".into())),
            (Some(other), None) => {
                return Err(Error::Config(format!("unknown weight.kind '{other}'")))
            }
        };
        if let Some(fmt) = output_format {
            cfg.output_format = fmt;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be >= 1".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
        if let Some(&c) = self.checkpoints.first() {
            if c == 0 {
                return Err(Error::Config("checkpoints must be >= 1".into()));
            }
        }
        if let Some(&c) = self.checkpoints.last() {
            if c > self.n_steps {
                return Err(Error::Config(format!(
                    "checkpoint {c} exceeds n_steps = {}",
                    self.n_steps
                )));
            }
        }
        if self.buffer_capacity == 0 {
            return Err(Error::Config("buffer_capacity must be >= 1".into()));
        }
        self.step()?;
        Ok(())
    }

    pub fn step(&self) -> Result<StepSchedule> {
        match self.step_kind {
            StepKind::PowerLaw => StepSchedule::power_law(self.gamma1, self.xi),
            StepKind::Constant => StepSchedule::constant(self.gamma1),
        }
    }

    pub fn resolved_weight_kind(&self) -> WeightKind {
        self.weight_kind.unwrap_or(match self.scheme {
            Scheme::Euler => WeightKind::Proportional,
            Scheme::Talay2 => WeightKind::Trapezoidal,
        })
    }

    pub fn weights(&self) -> Result<WeightSchedule> {
        WeightSchedule::new(self.resolved_weight_kind(), self.weight_c, self.step()?)
    }

    pub fn build_model(&self) -> Result<Arc<dyn Diffusion>> {
        self.model.build()
    }

    pub fn observable(&self) -> Result<Arc<dyn Observable>> {
        let d = self.build_model()?.dim();
        Ok(Arc::new(Monomial::parse(&self.f, d)?))
    }

    /// Checkpoints, or `[n_steps]` when none are configured.
    pub fn checkpoint_list(&self) -> Vec<u64> {
        if self.checkpoints.is_empty() {
            vec![self.n_steps]
        } else {
            self.checkpoints.clone()
        }
    }

    pub fn initial_state(&self, d: usize) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x) if x.len() != d => Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            }),
            Some(x) => Ok(x.clone()),
            None => Ok(vec![0.0; d]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            model.name = "ou1d"
            model.theta = 2
            scheme = "talay2"
            innovation = "three_point"
            step.xi = 0.2
            n_steps = 1e4
            checkpoints = [10, 100]
            "#,
        )
        .unwrap();
        assert_eq!(
            cfg.model,
            ModelSpec::Ou1d {
                theta: 2.0,
                sigma: std::f64::consts::SQRT_2
            }
        );
        assert_eq!(cfg.scheme, Scheme::Talay2);
        assert_eq!(cfg.resolved_weight_kind(), WeightKind::Trapezoidal);
        assert_eq!(cfg.n_steps, 10_000);
        assert_eq!(cfg.checkpoints, vec![10, 100]);
    }

    #[test]
    fn table_syntax_is_equivalent() {
        let a = ExperimentConfig::from_toml_str("[weight]\nkind = \"power\"\nr = 2.0\n").unwrap();
        let b = ExperimentConfig::from_toml_str("weight.kind = \"power\"\nweight.r = 2.0\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.resolved_weight_kind(), WeightKind::Power { r: 2.0 });
    }

    #[test]
    fn rejects_bad_input() {
        match ExperimentConfig::from_toml_str("step.xii = 0.3") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "step.xii"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml_str("checkpoints = [10, 5]").is_err());
        assert!(ExperimentConfig::from_toml_str("n_steps = 10\ncheckpoints = [100]").is_err());
        assert!(ExperimentConfig::from_toml_str("step.xi = 1.5").is_err());
        assert!(ExperimentConfig::from_toml_str("scheme = \"milstein\"").is_err());
        assert!(ExperimentConfig::from_toml_str("model.name = \"double_well\"\nmodel.theta = 1").is_err());
        assert!(matches!(
            ExperimentConfig::from_path(Path::new("/no/such/config.toml")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn ou_nd_matrices() {
        let cfg = ExperimentConfig::from_toml_str(
            "model.name = \"ou_nd\"\nmodel.theta = [[1, 0], [0, 2]]\nmodel.sigma = [[1, 0], [0, 1]]\nf = \"x1*x2\"",
        )
        .unwrap();
        assert_eq!(cfg.build_model().unwrap().dim(), 2);
        assert_eq!(cfg.observable().unwrap().dim(), 2);
        assert_eq!(cfg.initial_state(2).unwrap(), vec![0.0, 0.0]);
    }
}
