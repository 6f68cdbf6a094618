//! `ergodic` command-line front end.
//!
//! Exit codes: 0 success, 1 experiment failure (with `--assert`) or divergence,
//! 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::info;

use ergodic::diagnostics::{
    default_grid, mean_reversion_probe, moment_match_report, recursive_control_probe,
    recursive_control_scan, weak_order_probe, Verdict,
};
use ergodic::harness::{
    render, run_clt_experiment, run_ergodic_experiment, run_rate_experiment, run_single_trace,
    ExperimentConfig, Tabular,
};
use ergodic::model::{LyapunovSpec, ModelSpec, Quadrature};
use ergodic::Error;

#[derive(Parser, Debug)]
#[command(name = "ergodic", version, about = "Decreasing-step estimation of invariant laws of diffusions")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One trajectory; emits the ν_n(f) trace at the checkpoints.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replication index whose random stream is used.
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Replicated CLT statistic with regime, variance and normality test.
    Clt {
        #[command(flatten)]
        common: Common,
    },
    /// RMS error decay of ν_n(Af) and its fitted exponent.
    Rate {
        #[command(flatten)]
        common: Common,
    },
    /// Deterministic diagnostics on the model and scheme.
    Probe {
        #[arg(value_enum)]
        kind: ProbeKind,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        probe: ProbeArgs,
    },
    /// W₁ distance between the empirical measure and the invariant law.
    Wasserstein {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config with flat dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog model name (ou1d, double_well).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    innovation: Option<String>,
    /// Step exponent ξ.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    /// Observable, e.g. x^2 or x1*x2.
    #[arg(long = "observable", alias = "f")]
    observable: Option<String>,
    #[arg(long)]
    n_steps: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, env = "ERGODIC_SEED")]
    seed: Option<u64>,
    /// Comma-separated checkpoint indices.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<u64>>,
    /// Output directory; the file is named after the subcommand.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Exit with status 1 when the report's own tolerance check fails.
    #[arg(long)]
    assert: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ProbeKind {
    /// Recursive control margins for V = 1 + |x|².
    Control,
    MeanReversion,
    /// Mixed moments of the innovation law against N(0, I).
    Moments,
    /// One-step weak error ratios by exhaustive enumeration.
    WeakOrder,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Step sizes; several values run a scan (control) or a ratio table (weak-order).
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 4.0)]
    beta: f64,
    /// Highest moment order compared.
    #[arg(long, default_value_t = 5)]
    q: u32,
    #[arg(long, default_value_t = 1)]
    noise_dim: usize,
    /// Starting point for weak-order, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Use Monte Carlo with this many samples instead of enumeration.
    #[arg(long)]
    mc_samples: Option<usize>,
}

enum Failure {
    Usage(String),
    Experiment(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. }
            | Error::TooManyDivergences { .. }
            | Error::RegimeInconsistency { .. } => Failure::Experiment(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &c.model {
        if name != cfg.model.name() {
            cfg.model = match name.as_str() {
                "ou1d" => ModelSpec::Ou1d {
                    theta: 1.0,
                    sigma: std::f64::consts::SQRT_2,
                },
                "double_well" => ModelSpec::DoubleWell { sigma: 1.0 },
                "ou_nd" => {
                    return Err(Failure::Usage(
                        "ou_nd needs its matrices from a config file".into(),
                    ))
                }
                other => return Err(Failure::Usage(format!("unknown model '{other}'"))),
            };
        }
    }
    if let Some(s) = &c.scheme {
        cfg.scheme = s.parse()?;
    }
    if let Some(s) = &c.innovation {
        cfg.innovation = s.parse()?;
    }
    if let Some(v) = c.xi {
        cfg.xi = v;
    }
    if let Some(v) = c.gamma1 {
        cfg.gamma1 = v;
    }
    if let Some(v) = &c.observable {
        cfg.f = v.clone();
    }
    if let Some(v) = c.n_steps {
        cfg.n_steps = v;
    }
    if let Some(v) = c.replications {
        cfg.replications = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.checkpoints {
        cfg.checkpoints = v.clone();
    }
    if let Some(f) = &c.format {
        cfg.output_format = f.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_report<R: Tabular>(report: &R, cfg: &ExperimentConfig, c: &Common, name: &str) -> Outcome {
    let bytes = render(report, cfg.output_format)?;
    let path = match (&c.out, &cfg.output_path) {
        (Some(dir), _) => Some(dir.join(format!("{name}.{}", cfg.output_format))),
        (None, Some(p)) => Some(p.clone()),
        (None, None) => None,
    };
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            }
            fs::write(&p, bytes).map_err(|e| io_failure(&p, e))?;
            info!("wrote {}", p.display());
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::Usage(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("I/O error on {}: {e}", path.display()))
}

fn verdict(assert: bool, pass: bool, what: String) -> Outcome {
    eprintln!("{what}: {}", if pass { "PASS" } else { "FAIL" });
    if assert && !pass {
        Err(Failure::Experiment(what))
    } else {
        Ok(())
    }
}

fn simulate(c: &Common, replication: u64) -> Outcome {
    let cfg = load_config(c)?;
    let report = run_single_trace(&cfg, replication)?;
    write_report(&report, &cfg, c, "simulate")
}

fn clt(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let report = run_clt_experiment(&cfg, true)?;
    write_report(&report, &cfg, c, "clt")?;
    let last = report
        .checkpoints
        .last()
        .ok_or_else(|| Failure::Usage("no checkpoints".into()))?;
    let ks_ok = last.ks.is_none_or(|k| k.pass);
    let var_ok = report.variance.cross_check_passed.unwrap_or(true);
    let detail = match last.ks {
        Some(k) => format!("KS {:.4} vs {:.4}", k.distance, k.critical),
        None => "no KS hypothesis in this regime".into(),
    };
    verdict(
        c.assert,
        ks_ok && var_ok,
        format!(
            "clt {} at n = {}: mean {:.4}, variance {:.4} (predicted {:.4}), {detail}",
            report.regime, last.n, last.summary.mean, last.summary.variance, report.variance.value
        ),
    )
}

fn rate(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let report = run_rate_experiment(&cfg, true)?;
    write_report(&report, &cfg, c, "rate")?;
    verdict(
        c.assert,
        report.pass,
        format!(
            "rate slope {:.4}, target {:.4} ± {}",
            report.fit.slope, report.target, report.tolerance
        ),
    )
}

fn wasserstein(c: &Common) -> Outcome {
    let cfg = load_config(c)?;
    let report = run_ergodic_experiment(&cfg, true)?;
    write_report(&report, &cfg, c, "wasserstein")?;
    let w: Vec<f64> = report.checkpoints.iter().filter_map(|k| k.w1_mean).collect();
    if w.is_empty() {
        return Err(Failure::Usage(
            "W1 needs a one-dimensional model with a known invariant law".into(),
        ));
    }
    let decreasing = w.windows(2).all(|p| p[1] < p[0]);
    verdict(c.assert, decreasing, format!("mean W1 across checkpoints {w:?} decreasing"))
}

fn probe(kind: ProbeKind, c: &Common, a: &ProbeArgs) -> Outcome {
    let cfg = load_config(c)?;
    let model = cfg.build_model()?;
    let d = model.dim();
    let grid = default_grid(d);
    let quad = match a.mc_samples {
        Some(samples) => Quadrature::MonteCarlo {
            samples,
            seed: cfg.seed,
        },
        None => Quadrature::Enumerate,
    };
    let lyap = || LyapunovSpec::quadratic(d, a.p, a.a, a.alpha, a.beta);
    match kind {
        ProbeKind::Control => {
            let gammas = a.gamma.clone().unwrap_or_else(|| vec![1e-3]);
            if let [g] = gammas[..] {
                let r = recursive_control_probe(
                    cfg.scheme,
                    model.as_ref(),
                    &lyap()?,
                    g,
                    &grid,
                    cfg.innovation,
                    quad,
                )?;
                write_report(&r, &cfg, c, "probe_control")?;
                verdict(
                    c.assert,
                    r.verdict == Verdict::Pass,
                    format!("recursive control at gamma {g}: {}, worst margin {:.4e}", r.verdict, r.worst_margin),
                )
            } else {
                let s = recursive_control_scan(
                    cfg.scheme,
                    model.as_ref(),
                    &lyap()?,
                    &gammas,
                    &grid,
                    cfg.innovation,
                    quad,
                )?;
                write_report(&s, &cfg, c, "probe_control")?;
                verdict(
                    c.assert,
                    s.entries.iter().all(|e| e.1 == Verdict::Pass),
                    format!("recursive control scan, passing threshold {:?}", s.passing_threshold),
                )
            }
        }
        ProbeKind::MeanReversion => {
            let r = mean_reversion_probe(model.as_ref(), &lyap()?, &grid)?;
            write_report(&r, &cfg, c, "probe_mean_reversion")?;
            verdict(
                c.assert,
                r.verdict == Verdict::Pass,
                format!("mean reversion: {}, worst margin {:.4e}", r.verdict, r.worst_margin),
            )
        }
        ProbeKind::Moments => {
            let r = moment_match_report(cfg.innovation, a.noise_dim, a.q)?;
            write_report(&r, &cfg, c, "probe_moments")?;
            eprintln!(
                "{} matches Gaussian moments through order {} (max deviation {})",
                cfg.innovation.name(),
                r.matched_through,
                r.max_abs_deviation
            );
            Ok(())
        }
        ProbeKind::WeakOrder => {
            let f = cfg.observable()?;
            let x = a.x.clone().unwrap_or_else(|| vec![1.0; d]);
            let gammas = a
                .gamma
                .clone()
                .unwrap_or_else(|| vec![2f64.powi(-5), 2f64.powi(-6), 2f64.powi(-7)]);
            let r = weak_order_probe(cfg.scheme, &model, &f, &x, &gammas, cfg.innovation)?;
            write_report(&r, &cfg, c, "probe_weak_order")?;
            eprintln!("weak error ratios {:?}", r.ratios);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--threads {k}: {e}")))?;
    }
    match &cli.command {
        Command::Simulate {
            common,
            replication,
        } => simulate(common, *replication),
        Command::Clt { common } => clt(common),
        Command::Rate { common } => rate(common),
        Command::Probe {
            kind,
            common,
            probe: args,
        } => probe(*kind, common, args),
        Command::Wasserstein { common } => wasserstein(common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    if let Some(0) = cli.threads {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Experiment(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
    }
}
