mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use support::{jacobi_singular_values, tail_norm, Mat};

fn boundedrank(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boundedrank"))
        .args(args)
        .current_dir(dir)
        .env_remove("LOWRANK_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, value: &Value) {
    fs::write(dir.join(name), serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn lowrank_target() -> Mat {
    Mat::from_fn(6, 5, |i, j| {
        ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * (i * j) as f64
    })
}

fn setup_lowrank(dir: &Path, extra: Value) {
    let a = lowrank_target();
    let entries: Vec<f64> = (0..6)
        .flat_map(|i| (0..5).map(move |j| (i, j)))
        .map(|ij| a[ij])
        .collect();
    write(
        dir,
        "problem.json",
        &json!({ "type": "lowrank_approx", "shape": [6, 5],
                 "payload": { "target": { "rows": 6, "cols": 5, "entries": entries } } }),
    );
    let mut config = json!({ "problem": "problem.json", "rank_bound": 2, "x0": "random:7" });
    for (k, v) in extra.as_object().unwrap() {
        config[k] = v.clone();
    }
    write(dir, "config.json", &config);
}

fn summary(dir: &Path, algorithm: &str) -> Value {
    let text =
        fs::read_to_string(dir.join("out").join(format!("summary_{algorithm}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn run_reaches_the_best_rank_two_approximation() {
    let dir = tempfile::tempdir().unwrap();
    setup_lowrank(dir.path(), json!({}));
    let out = boundedrank(&["run", "config.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path(), "p2gdr");
    assert_eq!(s["termination"], "stationary");
    let optimum = 0.5 * tail_norm(&jacobi_singular_values(&lowrank_target()), 2).powi(2);
    let f = s["final_f"].as_f64().unwrap();
    assert!(
        (f - optimum).abs() <= 1e-6 * (1.0 + optimum),
        "{f} vs {optimum}"
    );
    assert!(dir.path().join("out/trace_p2gdr.csv").exists());
    assert!(!dir.path().join("out/trace_p2gd.csv").exists());
}

#[test]
fn run_is_byte_for_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    setup_lowrank(dir.path(), json!({}));
    assert_eq!(
        boundedrank(&["run", "config.json"], dir.path())
            .status
            .code(),
        Some(0)
    );
    let first = fs::read(dir.path().join("out/trace_p2gdr.csv")).unwrap();
    assert_eq!(
        boundedrank(&["run", "config.json", "--out", "again"], dir.path())
            .status
            .code(),
        Some(0)
    );
    let second = fs::read(dir.path().join("again/trace_p2gdr.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn max_iters_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    setup_lowrank(dir.path(), json!({}));
    let out = boundedrank(
        &[
            "run",
            "config.json",
            "--max-iters",
            "1",
            "--stop-tol",
            "1e-300",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(dir.path(), "p2gdr")["termination"], "max_iters");
}

#[test]
fn line_search_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // f = 50 (x₀₀ − 1)²: from zero the first trial overshoots far past the
    // minimizer and one halving is not enough.
    write(
        dir.path(),
        "problem.json",
        &json!({ "type": "polynomial", "shape": [2, 2], "payload": [
            { "monomial": [[0, 0, 2]], "coeff": 50.0 },
            { "monomial": [[0, 0, 1]], "coeff": -100.0 },
            { "monomial": [], "coeff": 50.0 }
        ] }),
    );
    write(
        dir.path(),
        "config.json",
        &json!({ "problem": "problem.json", "rank_bound": 1, "line_search": { "max_backtracks": 1 } }),
    );
    let out = boundedrank(&["run", "config.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        summary(dir.path(), "p2gdr")["termination"],
        "line_search_failure"
    );
}

#[test]
fn malformed_config_exits_with_one_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    setup_lowrank(dir.path(), json!({}));
    fs::write(
        dir.path().join("broken.json"),
        "{ \"problem\": \"problem.json\", ",
    )
    .unwrap();
    let out = boundedrank(&["run", "broken.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());

    write(
        dir.path(),
        "unknown.json",
        &json!({ "problem": "problem.json", "rank_bound": 2, "rnak": 3 }),
    );
    assert_eq!(
        boundedrank(&["run", "unknown.json"], dir.path())
            .status
            .code(),
        Some(1)
    );

    write(
        dir.path(),
        "too_big.json",
        &json!({ "problem": "problem.json", "rank_bound": 5 }),
    );
    assert_eq!(
        boundedrank(&["run", "too_big.json"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn compare_writes_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    setup_lowrank(dir.path(), json!({ "algorithm": "both" }));
    let out = boundedrank(&["compare", "config.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let verdict: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verdict.json")).unwrap())
            .unwrap();
    assert_eq!(verdict["apocalypse_flag"], false);
    for algorithm in ["p2gd", "p2gdr"] {
        assert_eq!(verdict[algorithm]["final_rank"], 2);
        assert!(dir
            .path()
            .join(format!("out/trace_{algorithm}.csv"))
            .exists());
    }
}

#[test]
fn seed_variable_overrides_the_configured_start() {
    let dir = tempfile::tempdir().unwrap();
    setup_lowrank(dir.path(), json!({}));
    let run = |seed: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_boundedrank"));
        cmd.args(["run", "config.json", "--out", out])
            .current_dir(dir.path());
        match seed {
            Some(s) => cmd.env("LOWRANK_SEED", s),
            None => cmd.env_remove("LOWRANK_SEED"),
        };
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        fs::read(dir.path().join(out).join("trace_p2gdr.csv")).unwrap()
    };
    let configured = run(None, "a");
    assert_eq!(run(Some("7"), "b"), configured);
    assert_ne!(run(Some("8"), "c"), configured);
}

#[test]
fn generated_problems_run() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["lowrank-approx", "completion", "polynomial"] {
        let out = boundedrank(
            &[
                "gen-problem",
                kind,
                "--rows",
                "5",
                "--cols",
                "4",
                "--out",
                "p.json",
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{kind}");
        write(
            dir.path(),
            "c.json",
            &json!({ "problem": "p.json", "rank_bound": 2, "max_iters": 3000 }),
        );
        let code = boundedrank(&["run", "c.json"], dir.path()).status.code();
        assert!(matches!(code, Some(0) | Some(2)), "{kind}: {code:?}");
    }
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = boundedrank(&["check"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().filter(|l| l.contains("PASS")).count() >= 20);
    assert!(!stdout.contains("FAIL"));
}
