//! End-to-end runs of the `stochkin` binary: outputs and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::root;

fn stochkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochkin"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const IMMIGRATION: &str = "species X = 0\nparam theta\nreaction imm: 0 -> X @ mass_action(theta)\n\
                           prior theta ~ log_uniform(-3, 3)\nobs X ~ gaussian(2)\n";
const IMMIGRATION_DATA: &str = "time,X\n1,4.1\n2,11.3\n3,14.2\n4,21.5\n5,24.0\n";

/// Config for the immigration model with extra TOML appended.
fn immigration_config(dir: &Path, extra: &str) -> String {
    write(dir, "imm.model", IMMIGRATION);
    write(dir, "imm.csv", IMMIGRATION_DATA);
    write(
        dir,
        "run.toml",
        &format!("seed = 3\nmodel = \"imm.model\"\ndata = [\"imm.csv\"]\n{extra}"),
    )
}

fn lv_abc_config(dir: &Path) -> String {
    let model = root().join("models/lv.model");
    let data = root().join("data/lv.csv");
    write(
        dir,
        "lv.toml",
        &format!(
            "seed = 5\nmodel = {model:?}\ndata = [{data:?}]\nmax_events = 100000\n\
             [abc]\nparticles = 40\ngenerations = 3\nbatch = 16\n"
        ),
    )
}

#[test]
fn bundled_simulate_config_reproduces_bundled_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let cfg = root().join("configs/lv_simulate.toml");
    let o = stochkin(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let made = std::fs::read(out.join("data_1.csv")).unwrap();
    let bundled = std::fs::read(root().join("data/lv.csv")).unwrap();
    assert_eq!(made, bundled);
    assert!(out.join("trajectory_1.csv").exists());
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn print_config_echoes_effective_toml() {
    let cfg = root().join("configs/lv_simulate.toml");
    let o = stochkin(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--print-config",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let table: toml::Table = text.parse().unwrap();
    assert_eq!(table["seed"].as_integer(), Some(99));
}

#[test]
fn abc_output_does_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = lv_abc_config(tmp.path());
    let mut runs = Vec::new();
    for w in ["1", "3"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = stochkin(&[
            "abc",
            "--config",
            &cfg,
            "--workers",
            w,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(std::fs::read(out.join("population_2.csv")).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_flag_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = lv_abc_config(tmp.path());
    let mut runs = Vec::new();
    for s in ["1", "2"] {
        let out = tmp.path().join(format!("s{s}"));
        let o = stochkin(&[
            "abc",
            "--config",
            &cfg,
            "--seed",
            s,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        runs.push(std::fs::read(out.join("population_0.csv")).unwrap());
    }
    assert_ne!(runs[0], runs[1]);
}

#[test]
fn hybrid_then_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = immigration_config(
        tmp.path(),
        "[abc]\nparticles = 100\ngenerations = 3\n[pmcmc]\nchains = 2\niterations = 300\nthin = 1\n\
         [diagnose]\npredictive_draws = 50\nmax_lag = 10\n",
    );
    let run = tmp.path().join("run");
    let o = stochkin(&[
        "hybrid",
        "--config",
        &cfg,
        "--out-dir",
        run.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "population_2.csv",
        "chain_0.csv",
        "chain_1.csv",
        "pmcmc_summary.toml",
        "summary.csv",
        "comparison.csv",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let diag = tmp.path().join("diag");
    let dcfg = write(
        tmp.path(),
        "diag.toml",
        &format!(
            "model = \"imm.model\"\ndata = [\"imm.csv\"]\n[diagnose]\nrun_dir = {:?}\npredictive_draws = 50\nmax_lag = 10\n",
            run
        ),
    );
    let o = stochkin(&[
        "diagnose",
        "--config",
        &dcfg,
        "--out-dir",
        diag.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(run.join("summary.csv")).unwrap(),
        std::fs::read(diag.join("summary.csv")).unwrap()
    );
}

#[test]
fn validation_failures_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "missing model",
            "abc",
            "model = \"absent.model\"\ndata = [\"imm.csv\"]\n",
        ),
        ("no chains", "hybrid", "[pmcmc]\nchains = 0\n"),
        ("quantile above 1", "abc", "[abc]\nquantile = 1.5\n"),
        ("quantile zero", "abc", "[abc]\nquantile = 0.0\n"),
        ("unknown key", "abc", "[abc]\nparticle = 10\n"),
        (
            "empty times",
            "simulate",
            "[simulate]\ntheta = [1.0]\ntimes = []\n",
        ),
    ];
    for (label, cmd, extra) in cases {
        let dir = tmp.path().join(label.replace(' ', "_"));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = if extra.starts_with("model") {
            write(&dir, "imm.csv", IMMIGRATION_DATA);
            write(&dir, "run.toml", extra)
        } else {
            immigration_config(&dir, extra)
        };
        let o = stochkin(&[
            cmd,
            "--config",
            &cfg,
            "--out-dir",
            dir.join("out").to_str().unwrap(),
        ]);
        assert_eq!(
            code(&o),
            2,
            "{label}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert_eq!(code(&stochkin(&["abc", "--no-such-flag"])), 2);
    assert_eq!(code(&stochkin(&["bogus"])), 2);
}

#[test]
fn exhausted_budget_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = immigration_config(
        tmp.path(),
        "[abc]\nparticles = 50\ngenerations = 2\nbudget = 60\n",
    );
    let o = stochkin(&[
        "abc",
        "--config",
        &cfg,
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&stochkin(&["--help"])), 0);
}
