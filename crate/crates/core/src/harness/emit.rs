//! CSV and JSON serialization of reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::clt::CltReport;
use super::ergodic::{ErgodicReport, TraceReport};
use super::rate::RateReport;
use crate::diagnostics::{ControlScan, MomentMatchReport, ProbeReport, WeakOrderReport};
use crate::empirical::measure::csv_error;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// A report with a flat tabular view.
pub trait Tabular: Serialize {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

fn num(x: f64) -> String {
    // Display prints the shortest text that parses back to the same f64
    x.to_string()
}

impl Tabular for CltReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["checkpoint_n", "replication", "statistic"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.checkpoints
            .iter()
            .flat_map(|c| {
                c.statistics
                    .iter()
                    .map(move |(r, s)| vec![c.n.to_string(), r.to_string(), num(*s)])
            })
            .collect()
    }
}

impl Tabular for RateReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "rms_error"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|(n, e)| vec![n.to_string(), num(*e)])
            .collect()
    }
}

impl Tabular for ErgodicReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["checkpoint_n", "replication", "nu_f", "w1"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for c in &self.checkpoints {
            for (r, v) in &c.nu_f {
                let w = c
                    .w1
                    .iter()
                    .find(|(q, _)| q == r)
                    .map_or(String::new(), |(_, w)| num(*w));
                out.push(vec![c.n.to_string(), r.to_string(), num(*v), w]);
            }
        }
        out
    }
}

impl Tabular for TraceReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "big_gamma", "big_h", "nu_f", "nu_af"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.snapshots
            .iter()
            .map(|s| {
                vec![
                    s.n.to_string(),
                    num(s.big_gamma),
                    num(s.big_h),
                    num(s.nu_f),
                    num(s.nu_af),
                ]
            })
            .collect()
    }
}

impl Tabular for ProbeReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["point", "margin", "tolerance", "std_error"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.grid
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let point = x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ");
                vec![
                    point,
                    num(self.margins[i]),
                    num(self.tolerances[i]),
                    num(self.std_errors[i]),
                ]
            })
            .collect()
    }
}

impl Tabular for ControlScan {
    fn header(&self) -> Vec<&'static str> {
        vec!["gamma", "verdict", "worst_margin"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|(g, v, m)| vec![num(*g), v.to_string(), num(*m)])
            .collect()
    }
}

impl Tabular for MomentMatchReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["exponents", "order", "innovation_moment", "gaussian_moment", "deviation"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|e| {
                let k = e.exponents.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
                vec![
                    k,
                    e.order.to_string(),
                    num(e.innovation_moment),
                    num(e.gaussian_moment),
                    num(e.deviation),
                ]
            })
            .collect()
    }
}

impl Tabular for WeakOrderReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["gamma", "error", "ratio"]
    }

    // ratio on row i is err(γ_i)/err(γ_{i+1}); blank on the last row
    fn rows(&self) -> Vec<Vec<String>> {
        self.errors
            .iter()
            .enumerate()
            .map(|(i, (g, e))| {
                let r = self.ratios.get(i).map_or(String::new(), |r| num(*r));
                vec![num(*g), num(*e), r]
            })
            .collect()
    }
}

/// Renders `report` in memory.
pub fn render<R: Tabular>(report: &R, format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Json => serde_json::to_vec_pretty(report)
            .map_err(|e| Error::Serialization(e.to_string())),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let path = Path::new("<memory>");
            w.write_record(report.header()).map_err(|e| csv_error(path, e))?;
            for row in report.rows() {
                w.write_record(&row).map_err(|e| csv_error(path, e))?;
            }
            w.into_inner()
                .map_err(|e| Error::Serialization(e.to_string()))
        }
    }
}

pub fn emit<R: Tabular>(report: &R, format: OutputFormat, path: &Path) -> Result<()> {
    let bytes = render(report, format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
