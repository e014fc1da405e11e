mod common;

use std::path::Path;
use std::process::Command;

use gofinv::harness::config::TruthSection;
use gofinv::harness::output::{csv_body, write_rate_report, RATE_COLUMNS};
use gofinv::harness::{run_rate_experiment, run_test_campaign, ExperimentConfig};
use proptest::prelude::*;

const BASE: &str = r#"
schema_version = 1
experiment_id = "it"
root_seed = 5
sigma = 0.1
N_grid = [40, 80, 160]
reps = 6
output_dir = "out"

[model]
kind = "two-compartment"
obs_times = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]

[grid]
lower = [0.0]
upper = [1.0]
resolution = [9]

[prior]
smoothness = 2.0

[estimator]
estimator = "map"

[truth]
kind = "null-element"
tau = [0.5, 3.0, 1.0, 1.0, 1.0, 1.5]

[null_class]
kind = "saturable-exp"
lower = [0.0, 0.5, 0.5, 0.5, 0.5, 0.5]
upper = [0.9, 6.0, 2.0, 2.0, 2.0, 2.0]

[test]
metric = "l2_mu"
mode = "theory"
K = 1.0
N = 100

[alternative]
separation_multiple = 2.0
"#;

fn base() -> ExperimentConfig {
    ExperimentConfig::from_toml(BASE).unwrap()
}

#[test]
fn rate_runs_are_reproducible_and_sorted() {
    let cfg = base();
    let a = run_rate_experiment(&cfg).unwrap();
    let b = run_rate_experiment(&cfg).unwrap();
    let values = |r: &gofinv::harness::RateReport| r.rows.iter().map(|x| x.value.to_bits()).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
    let keys: Vec<(usize, usize)> = a.rows.iter().map(|r| (r.n, r.replicate)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(a.slope.is_some());
    assert!((a.theoretical_slope + 0.4).abs() < 1e-12);
}

#[test]
fn single_sample_size_reports_medians_only() {
    let mut cfg = base();
    cfg.n_grid = vec![60];
    let rep = run_rate_experiment(&cfg).unwrap();
    assert!(rep.slope.is_none());
    assert_eq!(rep.cells.len(), 1);
    assert!(rep.notes.iter().any(|n| n.contains("insufficient N values")), "{:?}", rep.notes);
}

#[test]
fn nearly_noiseless_map_interpolates_prior_draws() {
    let mut cfg = base();
    cfg.sigma = 1e-6;
    cfg.truth = TruthSection::PriorDraw { scale: 0.5 };
    let rep = run_rate_experiment(&cfg).unwrap();
    for c in &rep.cells {
        assert!(c.median <= 1e-2, "N = {}: median {}", c.n, c.median);
    }
}

#[test]
fn theory_campaign_skips_calibration_and_adds_errors() {
    let mut cfg = base();
    cfg.reps = 50;
    let rep = run_test_campaign(&cfg).unwrap();
    assert!(rep.calibration.is_none());
    assert!(rep.seeds_disjoint);
    let e = &rep.estimate;
    assert_eq!(e.gamma_hat, e.type1_hat + e.type2_hat);
    assert_eq!(e.triangle_violations, 0);
    assert_eq!(rep.replicates.len(), 100);
}

#[test]
fn provenance_header_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = base();
    let rep = run_rate_experiment(&cfg).unwrap();
    let paths = write_rate_report(dir.path(), &cfg, &rep).unwrap();
    let csv = paths.iter().find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    let body = csv_body(&text);
    assert_eq!(body.lines().next().unwrap(), RATE_COLUMNS.join(","));
    let embedded: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .skip(2)
        .map(|l| format!("{l}\n"))
        .collect();
    let again = ExperimentConfig::from_toml(&embedded).unwrap();
    assert_eq!(again, cfg);
    let rerun = run_rate_experiment(&again).unwrap();
    let other = tempfile::tempdir().unwrap();
    let paths2 = write_rate_report(other.path(), &again, &rerun).unwrap();
    let csv2 = paths2.iter().find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
    assert_eq!(csv_body(&std::fs::read_to_string(csv2).unwrap()), body);
    let json = paths.iter().find(|p| p.extension().is_some_and(|e| e == "json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["config"]["root_seed"], 5);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn config_round_trips(
        seed in 0u64..(i64::MAX as u64),
        sigma in 0.001f64..1.0,
        start in 1usize..100,
        steps in proptest::collection::vec(1usize..500, 0..5),
        reps in 1usize..1000,
        alpha in 0.6f64..5.0,
        k in 0.01f64..10.0,
        calibrated in any::<bool>(),
    ) {
        let mut cfg = base();
        cfg.root_seed = seed;
        cfg.sigma = sigma;
        cfg.n_grid = steps.iter().scan(start, |n, s| { *n += s; Some(*n) }).collect();
        cfg.n_grid.insert(0, start);
        cfg.reps = reps;
        cfg.prior.smoothness = alpha;
        let t = cfg.test.as_mut().unwrap();
        t.mode = if calibrated {
            gofinv::gof::CriticalMode::Calibrated { level: k / 20.0, reps: 100 + reps }
        } else {
            gofinv::gof::CriticalMode::Theory { k }
        };
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}

fn gofinv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gofinv"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn cli_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "base.toml", BASE);
    let run = |args: &[&str]| {
        code(gofinv().arg("--config").arg(&cfg).arg("--out").arg(&out).args(args))
    };

    assert_eq!(run(&["simulate", "--n", "30"]), 0);
    let data = out.join("it_dataset.csv");
    assert!(data.exists());
    assert_eq!(run(&["estimate", "--data", data.to_str().unwrap()]), 0);
    let est = out.join("it_estimate.json");
    assert_eq!(run(&["test", "--estimate", est.to_str().unwrap()]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("it_test.json")).unwrap()).unwrap();
    assert!(report["report"]["statistic"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["root_seed"], 5);
    assert_eq!(run(&["--emit-plotscript", "rates"]), 0);
    assert!(std::fs::read_dir(&out).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "gp")));
    // Calibration needs mode = "calibrated".
    assert_eq!(run(&["calibrate"]), 2);

    let missing = dir.path().join("nope.toml");
    assert_eq!(code(gofinv().arg("--config").arg(&missing).arg("rates")), 2);
    let bad = write_config(dir.path(), "bad.toml", &BASE.replace("schema_version = 1", "schema_version = 9"));
    assert_eq!(code(gofinv().arg("--config").arg(&bad).arg("rates")), 2);
}

const CUSTOM: &str = r#"
schema_version = 1
experiment_id = "custom"
root_seed = 3
sigma = 0.1
N_grid = [20, 40, 80]
reps = 8
output_dir = "out"

[model]
kind = "custom"
obs_times = [0.25, 0.5, 1.0, 2.0]

[model.system]
matrix = [[-2.0, 1.0], [OFFDIAG, -3.0]]
matrix_slopes = [[[0.0, 0.0], [1.0, 0.0]]]
init = [1.0, 0.0]

[grid]
lower = [0.0]
upper = [1.0]
resolution = [9]

[prior]
smoothness = 2.0

[estimator]
estimator = "map"

[truth]
kind = "prior-draw"
scale = 1.0
"#;

#[test]
fn cli_reports_numerical_and_partial_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // A rotation-like system has complex eigenvalues for every parameter value.
    let complex = CUSTOM.replace("[[-2.0, 1.0], [OFFDIAG, -3.0]]", "[[-1.0, -1.0], [1.0, -1.0]]");
    let cfg = write_config(dir.path(), "complex.toml", &complex);
    assert_eq!(code(gofinv().arg("--config").arg(&cfg).arg("--out").arg(&out).arg("simulate")), 3);

    // Valid only while the coupling 1 + θ stays positive, which some prior draws violate.
    let partial = CUSTOM.replace("OFFDIAG", "1.0");
    let cfg = write_config(dir.path(), "partial.toml", &partial);
    let status = code(gofinv().arg("--config").arg(&cfg).arg("--out").arg(&out).arg("rates"));
    assert_eq!(status, 4);
    let csv = std::fs::read_to_string(out.join("custom_rates.csv")).unwrap();
    let body = csv_body(&csv);
    assert!(body.lines().any(|l| l.ends_with(",ok")));
    assert!(body.lines().any(|l| l.ends_with(",failed")));
}
