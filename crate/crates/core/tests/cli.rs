use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_HP: &str =
    "n_blocks = 2\ndense_layers_per_block = 1\nnodes = 16\ndropout_rate = 0.2\nmax_epochs = 60\n";

fn ressurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ressurv"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = ressurv(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn synth_spec(n: usize, censor: f64) -> String {
    format!(
        "n = {n}\np = 5\nhazard_kind = \"linear\"\ntrue_coefficients = [1.0, -1.0, 0.5, 0.0, 0.0]\n\
         weibull_shape = 1.5\nbaseline_scale = 0.01\ntarget_censor_rate = {censor}\nseed = 7\n"
    )
}

/// Synthesize a linear dataset into `dir/name`.
fn dataset(dir: &Path, name: &str, n: usize, censor: f64) -> PathBuf {
    let spec = write(dir, &format!("{name}.toml"), &synth_spec(n, censor));
    let csv = dir.join(name);
    ok(&["synth", "--spec", p(&spec), "--out", p(&csv)]);
    csv
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for name in names {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn synth_is_deterministic_and_honours_censoring() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "s.toml", &synth_spec(300, 0.3));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["synth", "--spec", p(&spec), "--out", p(&a)]);
    ok(&["synth", "--spec", p(&spec), "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.truth.json")).unwrap(),
        fs::read(dir.path().join("b.truth.json")).unwrap()
    );
    let truth = json(&dir.path().join("a.truth.json"));
    assert_eq!(truth["true_scores"].as_array().unwrap().len(), 300);
    assert_eq!(truth["spec"]["seed"], 7);

    let full = dataset(dir.path(), "full.csv", 100, 0.0);
    let text = fs::read_to_string(full).unwrap();
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("1")));
}

#[test]
fn train_with_defaults_reaches_benchmark_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "lin.csv", 2000, 0.3);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["train", "--data", p(&csv), "--out", p(&a), "--seed", "3"]);
    ok(&["train", "--data", p(&csv), "--out", p(&b), "--seed", "3"]);
    same_files(&a, &b, &["summary.json", "epochs.jsonl", "checkpoint.json"]);

    let summary = json(&a.join("summary.json"));
    let c = summary["final_val_c_index"].as_f64().unwrap();
    assert!(c > 0.7, "validation C-index {c}");
    assert_eq!(summary["schema"], "ressurv-report/1");
    let epochs = jsonl(&a.join("epochs.jsonl"));
    assert_eq!(epochs.len() as u64, summary["epochs_run"].as_u64().unwrap());
    assert!(json(&a.join("metadata.json"))["wall_seconds"].is_number());
    let ck = ressurv::model::Checkpoint::load(a.join("checkpoint.json")).unwrap();
    assert_eq!(ck.feature_names.len(), 5);
}

#[test]
fn input_errors_exit_2_and_divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        dir.path(),
        "bad.csv",
        "sample_id,time,event,g1\na,1.0,1,0.5\nb,2.0,1,oops\nc,3.0,0,0.1\n",
    );
    let out = ressurv(&[
        "train",
        "--data",
        p(&bad),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let zero = write(
        dir.path(),
        "zero.csv",
        "sample_id,time,event,g1\na,1.0,1,0.5\nb,0,1,0.2\n",
    );
    assert_eq!(
        ressurv(&["cv", "--data", p(&zero), "--out", p(dir.path())])
            .status
            .code(),
        Some(2)
    );

    let csv = dataset(dir.path(), "lin.csv", 300, 0.3);
    let missing = ressurv(&[
        "cv",
        "--data",
        p(&csv),
        "--hp",
        "/nonexistent.toml",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = write(dir.path(), "u.toml", "learning_rat = 0.1\n");
    assert_eq!(
        ressurv(&[
            "train",
            "--data",
            p(&csv),
            "--hp",
            p(&unknown),
            "--out",
            p(dir.path())
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        ressurv(&["cv", "--data", p(&csv), "--k", "1", "--out", p(dir.path())])
            .status
            .code(),
        Some(2)
    );

    let hot = write(
        dir.path(),
        "hot.toml",
        &format!(
            "{SMALL_HP}optimizer = \"sgd\"\nlearning_rate = 0.1\nl2_lambda = 1e3\npatience = 50\n"
        ),
    );
    let out = ressurv(&[
        "train",
        "--data",
        p(&csv),
        "--hp",
        p(&hot),
        "--out",
        p(&dir.path().join("d")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn cv_reports_folds_and_their_mean() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "lin.csv", 400, 0.3);
    let hp = write(dir.path(), "hp.toml", SMALL_HP);
    let out = dir.path().join("cv");
    ok(&[
        "cv",
        "--data",
        p(&csv),
        "--hp",
        p(&hp),
        "--k",
        "5",
        "--seed",
        "2",
        "--out",
        p(&out),
    ]);
    let folds = jsonl(&out.join("folds.jsonl"));
    assert_eq!(folds.len(), 5);
    let mean = folds
        .iter()
        .map(|f| f["c_index"].as_f64().unwrap())
        .sum::<f64>()
        / 5.0;
    let summary = json(&out.join("summary.json"));
    assert!((summary["mean_c_index"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert_eq!(summary["k"], 5);
    assert_eq!(summary["fold_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn tiny_two_fold_cv_is_fast() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "tiny.csv", 10, 0.2);
    let hp = write(dir.path(), "hp.toml", SMALL_HP);
    let start = Instant::now();
    ok(&[
        "cv",
        "--data",
        p(&csv),
        "--hp",
        p(&hp),
        "--k",
        "2",
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert!(start.elapsed() < Duration::from_secs(5));
}

const TWO_POINT_GRID: &str = "[base]\nn_blocks = 2\ndense_layers_per_block = 1\nnodes = 16\nmax_epochs = 40\n\n[grid]\nlearning_rate = [1e-2, 1e-3]\n";

#[test]
fn gridsearch_output_is_independent_of_workers() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "lin.csv", 250, 0.3);
    let grid = write(dir.path(), "grid.toml", TWO_POINT_GRID);
    let (a, b) = (dir.path().join("w1"), dir.path().join("w4"));
    for (out, workers) in [(&a, "1"), (&b, "4")] {
        ok(&[
            "gridsearch",
            "--data",
            p(&csv),
            "--grid",
            p(&grid),
            "--k",
            "3",
            "--workers",
            workers,
            "--out",
            p(out),
        ]);
    }
    same_files(&a, &b, &["points.jsonl", "summary.json"]);
    let points = jsonl(&a.join("points.jsonl"));
    assert_eq!(points.len(), 2);
    let best = json(&a.join("summary.json"))["best_index"]
        .as_u64()
        .unwrap() as usize;
    let best_c = points[best]["mean_c_index"].as_f64().unwrap();
    assert!(points
        .iter()
        .all(|pt| pt["mean_c_index"].as_f64().unwrap() <= best_c));
}

#[test]
fn gridsearch_budget_limits_points() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "lin.csv", 150, 0.3);
    let grid = write(
        dir.path(),
        "grid.toml",
        "[base]\nn_blocks = 1\ndense_layers_per_block = 1\nmax_epochs = 20\n\n[grid]\nnodes = [4, 8, 16, 32, 64]\nlearning_rate = [1e-2, 1e-3]\n",
    );
    let out = dir.path().join("g");
    ok(&[
        "gridsearch",
        "--data",
        p(&csv),
        "--grid",
        p(&grid),
        "--k",
        "2",
        "--budget",
        "1",
        "--out",
        p(&out),
    ]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["grid_size"], 10);
    assert_eq!(summary["total_runs"], 1);
    assert_eq!(jsonl(&out.join("points.jsonl")).len(), 1);
}

#[test]
fn compare_lists_three_models_and_json_format_combines() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "lin.csv", 300, 0.3);
    let hp = write(dir.path(), "hp.toml", SMALL_HP);
    let out = dir.path().join("cmp");
    ok(&[
        "compare",
        "--data",
        p(&csv),
        "--hp",
        p(&hp),
        "--k",
        "3",
        "--format",
        "json",
        "--out",
        p(&out),
    ]);
    let report = json(&out.join("report.json"));
    let names: Vec<&str> = report["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["model"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["ressurv", "mlp_no_shortcut", "linear_cox"]);
    assert!(report["fold_hash"].is_string());
    assert!(!out.join("summary.json").exists());
}

#[test]
fn environment_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let csv = dataset(dir.path(), "lin.csv", 120, 0.3);
    let hp = write(dir.path(), "hp.toml", SMALL_HP);
    let out = dir.path().join("env");
    let status = Command::new(env!("CARGO_BIN_EXE_ressurv"))
        .args(["cv"])
        .env_clear()
        .env("RESSURV_DATA", &csv)
        .env("RESSURV_HP", &hp)
        .env("RESSURV_OUT", &out)
        .env("RESSURV_K", "3")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(jsonl(&out.join("folds.jsonl")).len(), 3);
}
