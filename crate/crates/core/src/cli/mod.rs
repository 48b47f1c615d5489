//! The `ressurv` command-line front end.
//!
//! Every command writes into an output directory:
//!
//! | command      | records (`--format jsonl`) | summary        |
//! |--------------|----------------------------|----------------|
//! | `train`      | `epochs.jsonl`             | `summary.json` |
//! | `cv`         | `folds.jsonl`              | `summary.json` |
//! | `gridsearch` | `points.jsonl`             | `summary.json` |
//! | `compare`    | `models.jsonl`             | `summary.json` |
//!
//! With `--format json` the records and summary are combined into one
//! pretty-printed `report.json`. Wall-clock data goes to `metadata.json`, so
//! every other file is a pure function of the inputs and seed.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! divergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{
    filter_features, filter_patients, generate_synthetic, load_csv, standardize_apply,
    standardize_fit, stratified_holdout, write_csv, CsvSchema, SurvivalDataset, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::train::{
    compare_models, cross_validate, grid_search, train, GridSpec, Hyperparameters,
    VALIDATION_FRACTION,
};

pub const REPORT_SCHEMA: &str = "ressurv-report/1";
pub const TRUTH_SCHEMA: &str = "ressurv-truth/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ressurv", version, about = "Residual Cox survival networks")]
pub struct Cli {
    /// Worker threads for cross-validation and grid search (0 = all cores).
    #[arg(long, global = true, default_value_t = 0, env = "RESSURV_WORKERS")]
    pub workers: usize,

    /// Report layout.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Jsonl, env = "RESSURV_FORMAT")]
    pub format: ReportFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    /// One JSON record per line plus `summary.json`.
    Jsonl,
    /// A single pretty-printed `report.json`.
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic survival dataset from a TOML spec.
    Synth(SynthArgs),
    /// Train one network with an 80/20 early-stopping split.
    Train(TrainArgs),
    /// k-fold cross-validated C-index for one hyperparameter setting.
    Cv(CvArgs),
    /// Cross-validate every point of a hyperparameter grid.
    Gridsearch(GridArgs),
    /// ResSurv vs the no-shortcut ablation vs linear Cox on shared folds.
    Compare(CvArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic dataset spec (TOML).
    #[arg(long, env = "RESSURV_SPEC")]
    pub spec: PathBuf,
    /// Output CSV; the ground truth goes next to it as `<stem>.truth.json`.
    #[arg(long, env = "RESSURV_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV.
    #[arg(long, env = "RESSURV_DATA")]
    pub data: PathBuf,
    #[arg(long, default_value = "sample_id", env = "RESSURV_ID_COLUMN")]
    pub id_column: String,
    #[arg(long, default_value = "time", env = "RESSURV_TIME_COLUMN")]
    pub time_column: String,
    #[arg(long, default_value = "event", env = "RESSURV_EVENT_COLUMN")]
    pub event_column: String,
    /// Features with variance at or below this are dropped.
    #[arg(long, default_value_t = 1e-8, env = "RESSURV_MIN_VARIANCE")]
    pub min_variance: f64,
    /// Output directory (created if missing).
    #[arg(long, env = "RESSURV_OUT")]
    pub out: PathBuf,
    /// Seed for data splits.
    #[arg(long, default_value_t = 0, env = "RESSURV_SEED")]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hyperparameter file (TOML); defaults apply when omitted.
    #[arg(long, env = "RESSURV_HP")]
    pub hp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "RESSURV_HP")]
    pub hp: Option<PathBuf>,
    #[arg(long, default_value_t = 5, env = "RESSURV_K")]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Grid file (TOML with `[base]` and `[grid]` tables).
    #[arg(long, env = "RESSURV_GRID")]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 5, env = "RESSURV_K")]
    pub k: usize,
    /// Evaluate at most this many grid points (default: all).
    #[arg(long, env = "RESSURV_BUDGET")]
    pub budget: Option<usize>,
}

/// Map an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_divergence() {
        EXIT_DIVERGENCE
    } else {
        EXIT_CONFIG
    }
}

/// Run a parsed command line on a thread pool sized by `--workers`.
pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cli.workers)))?;
    let format = cli.format;
    pool.install(|| match cli.command {
        Command::Synth(a) => cmd_synth(&a.spec, &a.out),
        Command::Train(a) => cmd_train(&a.data, a.hp.as_deref(), format),
        Command::Cv(a) => cmd_cv(&a.data, a.hp.as_deref(), a.k, format),
        Command::Gridsearch(a) => cmd_gridsearch(&a.data, &a.grid, a.k, a.budget, format),
        Command::Compare(a) => cmd_compare(&a.data, a.hp.as_deref(), a.k, format),
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_hp(path: Option<&Path>) -> Result<Hyperparameters> {
    let hp = match path {
        Some(p) => Hyperparameters::from_toml_str(&read_text(p)?)?,
        None => Hyperparameters::default(),
    };
    hp.validate()?;
    Ok(hp)
}

/// Load, drop invalid patients and low-variance features.
fn prepare_data(args: &DataArgs) -> Result<(SurvivalDataset, Value)> {
    let schema = CsvSchema {
        id_column: args.id_column.clone(),
        time_column: args.time_column.clone(),
        event_column: args.event_column.clone(),
    };
    let raw = load_csv(&args.data, &schema)?;
    let (ds, removed) = filter_patients(&raw)?;
    let ds = filter_features(&ds, args.min_variance)?;
    ds.validate()?;
    let info = json!({
        "n_samples": ds.n_samples(),
        "n_events": ds.n_events(),
        "n_features": ds.n_features(),
        "features_dropped": raw.n_features() - ds.n_features(),
        "patients_dropped": removed,
    });
    Ok((ds, info))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_metadata(dir: &Path, command: &str, started: SystemTime, clock: Instant) -> Result<()> {
    let secs = |t: SystemTime| {
        t.duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    };
    let meta = json!({
        "schema": REPORT_SCHEMA,
        "command": command,
        "started_unix": secs(started),
        "finished_unix": secs(SystemTime::now()),
        "wall_seconds": clock.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_text(
        &dir.join("metadata.json"),
        &serde_json::to_string_pretty(&meta)?,
    )
}

/// Write `records` and `summary` in the requested layout. `summary` must be
/// a JSON object; the schema tag is inserted into it.
fn write_report<R: Serialize>(
    dir: &Path,
    records_name: &str,
    records: &[R],
    mut summary: Value,
    format: ReportFormat,
) -> Result<()> {
    summary["schema"] = json!(REPORT_SCHEMA);
    match format {
        ReportFormat::Jsonl => {
            let mut text = String::new();
            for r in records {
                text.push_str(&serde_json::to_string(r)?);
                text.push('\n');
            }
            write_text(&dir.join(format!("{records_name}.jsonl")), &text)?;
            write_text(
                &dir.join("summary.json"),
                &serde_json::to_string_pretty(&summary)?,
            )
        }
        ReportFormat::Json => {
            summary[records_name] = serde_json::to_value(records)?;
            write_text(
                &dir.join("report.json"),
                &serde_json::to_string_pretty(&summary)?,
            )
        }
    }
}

/// Generate a synthetic dataset and its ground-truth sidecar.
pub fn cmd_synth(spec_path: &Path, out: &Path) -> Result<()> {
    let spec: SyntheticSpec = toml::from_str(&read_text(spec_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    let (ds, scores) = generate_synthetic(&spec)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_csv(out, &ds, &CsvSchema::default())?;
    let truth = json!({
        "schema": TRUTH_SCHEMA,
        "spec": spec,
        "sample_ids": ds.sample_ids(),
        "true_scores": scores,
        "censor_rate": 1.0 - ds.n_events() as f64 / ds.n_samples() as f64,
    });
    write_text(&truth_path(out), &serde_json::to_string(&truth)?)
}

/// `data.csv` → `data.truth.json`.
pub fn truth_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.truth.json"))
}

pub fn cmd_train(args: &DataArgs, hp_path: Option<&Path>, format: ReportFormat) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let hp = load_hp(hp_path)?;
    let (ds, data_info) = prepare_data(args)?;
    create_dir(&args.out)?;

    let (tr_idx, val_idx) = stratified_holdout(&ds, VALIDATION_FRACTION, args.seed)?;
    let (tr_raw, val_raw) = (ds.subset(&tr_idx), ds.subset(&val_idx));
    let standardization = standardize_fit(&tr_raw)?;
    let tr = standardize_apply(&tr_raw, &standardization)?;
    let val = standardize_apply(&val_raw, &standardization)?;
    let report = train(&tr, &val, &hp)?;

    let best = report.best_record();
    let summary = json!({
        "command": "train",
        "seed": args.seed,
        "data": data_info,
        "n_train": tr.n_samples(),
        "n_val": val.n_samples(),
        "hyperparameters": hp,
        "on_grid": report.on_grid,
        "decoupled_weight_decay": report.decoupled_weight_decay,
        "epochs_run": report.epochs_run(),
        "best_epoch": report.best_epoch,
        "best_val_loss": report.best_val_loss,
        "final_val_c_index": best.val_c_index,
        "stopped_early": report.stopped_early,
        "checkpoint": "checkpoint.json",
    });
    write_report(&args.out, "epochs", &report.epochs, summary, format)?;
    Checkpoint::new(
        report.params.clone(),
        standardization,
        ds.feature_names().to_vec(),
    )
    .save(args.out.join("checkpoint.json"))?;
    write_metadata(&args.out, "train", started, clock)
}

pub fn cmd_cv(
    args: &DataArgs,
    hp_path: Option<&Path>,
    k: usize,
    format: ReportFormat,
) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let hp = load_hp(hp_path)?;
    let (ds, data_info) = prepare_data(args)?;
    create_dir(&args.out)?;
    let cv = cross_validate(&ds, &hp, k, args.seed)?;
    let summary = json!({
        "command": "cv",
        "data": data_info,
        "hyperparameters": hp,
        "k": cv.k,
        "seed": cv.seed,
        "fold_hash": cv.fold_hash,
        "mean_c_index": cv.mean_c_index,
        "std_c_index": cv.std_c_index,
    });
    write_report(&args.out, "folds", &cv.folds, summary, format)?;
    write_metadata(&args.out, "cv", started, clock)
}

pub fn cmd_gridsearch(
    args: &DataArgs,
    grid_path: &Path,
    k: usize,
    budget: Option<usize>,
    format: ReportFormat,
) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let grid = GridSpec::from_toml_str(&read_text(grid_path)?)?;
    grid.validate()?;
    let budget = budget.unwrap_or(grid.len());
    let (ds, data_info) = prepare_data(args)?;
    create_dir(&args.out)?;
    let result = grid_search(&ds, &grid, k, args.seed, budget)?;
    let best = result.best_point();
    let summary = json!({
        "command": "gridsearch",
        "data": data_info,
        "k": k,
        "seed": args.seed,
        "grid_size": grid.len(),
        "budget": budget,
        "total_runs": result.total_runs,
        "failed_points": result.points.iter().filter(|p| p.failure.is_some()).count(),
        "best_index": result.best,
        "best_mean_c_index": best.and_then(|p| p.mean_c_index),
        "best_hyperparameters": best.map(|p| &p.hyperparameters),
    });
    write_report(&args.out, "points", &result.points, summary, format)?;
    write_metadata(&args.out, "gridsearch", started, clock)
}

pub fn cmd_compare(
    args: &DataArgs,
    hp_path: Option<&Path>,
    k: usize,
    format: ReportFormat,
) -> Result<()> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let hp = load_hp(hp_path)?;
    let (ds, data_info) = prepare_data(args)?;
    create_dir(&args.out)?;
    let report = compare_models(&ds, &hp, k, args.seed)?;
    let summary = json!({
        "command": "compare",
        "data": data_info,
        "hyperparameters": hp,
        "k": report.k,
        "seed": report.seed,
        "fold_hash": report.fold_hash,
    });
    write_report(&args.out, "models", &report.models, summary, format)?;
    write_metadata(&args.out, "compare", started, clock)
}
