use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ergodic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodic"))
        .args(args)
        .env_remove("ERGODIC_SEED")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_exits_2_and_names_path() {
    let o = ergodic(&["clt", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.toml"), "{}", stderr(&o));
}

#[test]
fn help_exits_0() {
    let o = ergodic(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["simulate", "clt", "rate", "probe", "wasserstein"] {
        assert!(text.contains(sub), "{text}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ergodic(&[]).status.code(), Some(2));
    assert_eq!(ergodic(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ergodic(&["simulate", "--xi", "abc"]).status.code(), Some(2));
    assert_eq!(ergodic(&["simulate", "--xi", "1.5"]).status.code(), Some(2));
    assert_eq!(ergodic(&["simulate", "--model", "nope"]).status.code(), Some(2));
    assert_eq!(ergodic(&["--threads", "0", "simulate"]).status.code(), Some(2));
    // Gaussian innovations have no finite support to enumerate
    assert_eq!(ergodic(&["probe", "weak-order"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "scheme = \"euler\"\nstep.gama1 = 0.5\n").unwrap();
    let o = ergodic(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step.gama1"), "{}", stderr(&o));
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = ergodic(&[
            "wasserstein",
            "--n-steps",
            "20000",
            "--replications",
            "4",
            "--checkpoints",
            "200,2000,20000",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out.join("wasserstein.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("checkpoint_n,replication,nu_f,w1\n"));
}

#[test]
fn seed_env_var_is_the_default() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ergodic"));
        cmd.args(["simulate", "--n-steps", "1000"]);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        match env {
            Some(s) => cmd.env("ERGODIC_SEED", s),
            None => cmd.env_remove("ERGODIC_SEED"),
        };
        let o = cmd.output().unwrap();
        assert!(o.status.success());
        o.stdout
    };
    assert_eq!(run(Some("9"), None), run(None, Some("9")));
    assert_ne!(run(Some("9"), None), run(None, Some("10")));
    assert_eq!(run(Some("10"), Some("9")), run(None, Some("9")));
}

#[test]
fn assert_maps_probe_verdicts_to_exit_codes() {
    let pass = ergodic(&["probe", "control", "--alpha", "2", "--beta", "4", "--assert"]);
    assert_eq!(pass.status.code(), Some(0), "{}", stderr(&pass));
    let fail = ergodic(&["probe", "control", "--alpha", "10", "--beta", "4", "--assert"]);
    assert_eq!(fail.status.code(), Some(1));
    // without --assert a failing verdict is still reported but exits 0
    let report = ergodic(&["probe", "control", "--alpha", "10"]);
    assert_eq!(report.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&report.stdout).starts_with("point,margin,tolerance,std_error"));
}

#[test]
fn probe_tables() {
    let o = ergodic(&["probe", "moments", "--innovation", "three_point", "--q", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")), "{text}");
    let o = ergodic(&[
        "probe",
        "weak-order",
        "--scheme",
        "talay2",
        "--innovation",
        "three_point",
        "--observable",
        "x^4",
        "--gamma",
        "0.015625,0.0078125",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"ratios\""));
}

#[test]
fn rate_assert_on_euler_acceptance_config() {
    let cfg = config("rate_euler.toml");
    let o = ergodic(&[
        "rate",
        "--config",
        cfg.to_str().unwrap(),
        "--model",
        "ou1d",
        "--xi",
        "0.333",
        "--assert",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,rms_error"));
    assert_eq!(text.lines().count(), 6);
}
