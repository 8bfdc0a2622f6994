//! Command-line front end. Each command is also callable as a function.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_records, loso_folds, predict_records, read_prediction_dump, run_loso_folds, write_prediction_dump,
    EvaluationReport,
};
use crate::features::store::{read_feature_store, write_feature_store, FeatureRow};
use crate::features::{build_feature_vectors, FeatureConfig};
use crate::hierarchy::{load_bundle, save_bundle, train_multilayer};
use crate::ingest::{
    build_windows_with, parse_annotations_csv, parse_imu_csv_with_rate, unlabeled_windows,
    write_annotations_csv, write_imu_csv, DropReport, Window,
};
use crate::synth::{synth_cohort, ClassMix, CohortSpec, Signature};

pub const LOG_ENV: &str = "MLGP_LOG";
const IMU_SUFFIX: &str = ".imu.csv";
const LABEL_SUFFIX: &str = ".labels.csv";

#[derive(Debug, Parser)]
#[command(name = "mlgp", version, about = "Parkinsonian symptom class and severity from wrist IMU data")]
pub struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort.
    Synth(SynthArgs),
    /// Ingest a cohort directory and write the feature store.
    Featurize(FeaturizeArgs),
    /// Train the three-layer model on a feature store.
    Train(TrainArgs),
    /// Per-minute predictions for one recording.
    Predict(PredictArgs),
    /// Leave-one-subject-out evaluation.
    Evaluate(EvaluateArgs),
    /// Render a saved report or prediction dump.
    Report(ReportArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub minutes: Option<u32>,
    /// Use the well-separated signatures and class mix.
    #[arg(long)]
    pub separable: bool,
    /// Create the output directory if missing.
    #[arg(long)]
    pub create: bool,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// IMU CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run only the first N folds.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` or a prediction dump CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Synth(a) => {
            if let Some(p) = &a.out {
                cfg.paths.data_dir = p.clone();
            }
            if a.separable {
                cfg.synth.signature = Signature::separable();
                cfg.synth.class_mix = ClassMix::separable();
            }
            if let Some(s) = a.seed {
                cfg.synth.seed = s;
            }
            if let Some(n) = a.subjects {
                cfg.synth.subjects = n;
            }
            if let Some(m) = a.minutes {
                cfg.synth.minutes = m;
            }
            cmd_synth(&cfg, a.create, cli.force)
        }
        Command::Featurize(a) => {
            if let Some(p) = &a.data {
                cfg.paths.data_dir = p.clone();
            }
            if let Some(p) = &a.out {
                cfg.paths.features = p.clone();
            }
            cmd_featurize(&cfg, cli.force).map(|_| ())
        }
        Command::Train(a) => {
            if let Some(p) = &a.features {
                cfg.paths.features = p.clone();
            }
            if let Some(p) = &a.out {
                cfg.paths.model_dir = p.clone();
            }
            cmd_train(&cfg, cli.force)
        }
        Command::Predict(a) => {
            if let Some(p) = &a.model {
                cfg.paths.model_dir = p.clone();
            }
            cmd_predict(&cfg, &a.input, a.out.as_deref(), cli.force)
        }
        Command::Evaluate(a) => {
            if let Some(p) = &a.features {
                cfg.paths.features = p.clone();
            }
            if let Some(p) = &a.out {
                cfg.paths.output_dir = p.clone();
            }
            if a.folds.is_some() {
                cfg.evaluate.folds = a.folds;
            }
            if let Some(t) = a.threads {
                cfg.evaluate.threads = t;
            }
            cfg.validate()?;
            cmd_evaluate(&cfg, cli.force).map(|_| ())
        }
        Command::Report(a) => {
            let text = cmd_report(&a.input, a.json, &cfg)?;
            print!("{text}");
            Ok(())
        }
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    }
}

fn refuse_existing(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    spec: &'a CohortSpec,
    subjects: Vec<SynthEntry>,
}

#[derive(Serialize)]
struct SynthEntry {
    subject_id: String,
    seed: u64,
    imu: String,
    labels: String,
    samples: usize,
}

pub fn cmd_synth(cfg: &RunConfig, create: bool, force: bool) -> Result<()> {
    cfg.validate()?;
    let dir = &cfg.paths.data_dir;
    if !dir.is_dir() {
        if !create {
            return Err(Error::Config(format!("{} does not exist; pass --create", dir.display())));
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let manifest_path = dir.join("manifest.json");
    refuse_existing(&manifest_path, force)?;
    let profiles = cfg.synth.profiles();
    let cohort = synth_cohort(&profiles)?;
    let mut entries = Vec::new();
    for (p, (rec, ann)) in profiles.iter().zip(&cohort) {
        let imu = format!("{}{IMU_SUFFIX}", p.subject_id);
        let labels = format!("{}{LABEL_SUFFIX}", p.subject_id);
        write_imu_csv(&dir.join(&imu), rec)?;
        write_annotations_csv(&dir.join(&labels), ann)?;
        entries.push(SynthEntry {
            subject_id: p.subject_id.clone(),
            seed: p.seed,
            imu,
            labels,
            samples: rec.samples.len(),
        });
    }
    write_json(
        &manifest_path,
        &SynthManifest {
            spec: &cfg.synth,
            subjects: entries,
        },
    )?;
    log::info!("wrote {} subjects to {}", cohort.len(), dir.display());
    Ok(())
}

/// Pairs of `(imu, labels)` files in a cohort directory, sorted by subject.
pub fn cohort_files(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(subject) = name.strip_suffix(IMU_SUFFIX) {
            let labels = dir.join(format!("{subject}{LABEL_SUFFIX}"));
            if !labels.is_file() {
                return Err(Error::Config(format!("{} has no label file {}", path.display(), labels.display())));
            }
            out.push((subject.to_string(), path.clone(), labels));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Config(format!("no *{IMU_SUFFIX} files in {}", dir.display())));
    }
    Ok(out)
}

fn featurize_windows(windows: &[Window], cfg: &FeatureConfig) -> Result<Vec<FeatureRow>> {
    windows
        .iter()
        .zip(build_feature_vectors(windows, cfg))
        .map(|(w, f)| {
            Ok(FeatureRow {
                subject_id: w.subject_id.clone(),
                window_index: w.window_index,
                annotation: w.annotation,
                features: f?,
            })
        })
        .collect()
}

fn featurize_subject(cfg: &RunConfig, imu: &Path, labels: &Path) -> Result<(Vec<FeatureRow>, DropReport)> {
    let (rec, report) = parse_imu_csv_with_rate(imu, cfg.ingest.rate_hz)?;
    if report.clamped_values > 0 || report.duplicate_timestamps_removed > 0 {
        log::warn!(
            "{}: {} values clamped, {} duplicate timestamps removed",
            imu.display(),
            report.clamped_values,
            report.duplicate_timestamps_removed
        );
    }
    let ann = parse_annotations_csv(labels)?;
    let (windows, drops) = build_windows_with(&rec, &ann, cfg.ingest.min_window_samples)?;
    Ok((featurize_windows(&windows, &cfg.features)?, drops))
}

/// Returns the number of rows written.
pub fn cmd_featurize(cfg: &RunConfig, force: bool) -> Result<usize> {
    cfg.validate()?;
    let out = &cfg.paths.features;
    refuse_existing(out, force)?;
    let files = cohort_files(&cfg.paths.data_dir)?;
    let workers = cfg.evaluate.thread_count().min(files.len()).max(1);
    let mut results: Vec<Option<Result<(Vec<FeatureRow>, DropReport)>>> = (0..files.len()).map(|_| None).collect();
    thread::scope(|s| {
        let per = files.len().div_ceil(workers);
        for (chunk, names) in results.chunks_mut(per).zip(files.chunks(per)) {
            s.spawn(move || {
                for (slot, (_, imu, labels)) in chunk.iter_mut().zip(names) {
                    *slot = Some(featurize_subject(cfg, imu, labels));
                }
            });
        }
    });
    let mut rows = Vec::new();
    let mut drops = Vec::new();
    for r in results {
        let (r, d) = r.expect("every subject featurized")?;
        rows.extend(r);
        drops.push(d);
    }
    ensure_parent(out)?;
    write_feature_store(out, &rows)?;
    let mut drop_path = out.clone().into_os_string();
    drop_path.push(".drops.json");
    write_json(Path::new(&drop_path), &drops)?;
    log::info!("wrote {} feature rows to {}", rows.len(), out.display());
    Ok(rows.len())
}

pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<()> {
    cfg.validate()?;
    let dir = &cfg.paths.model_dir;
    refuse_existing(&dir.join("manifest.json"), force)?;
    let rows = read_feature_store(&cfg.paths.features)?;
    let model = train_multilayer(&rows, &cfg.model, None)?;
    save_bundle(&model, dir)
}

pub const PREDICTION_HEADER: [&str; 7] =
    ["subject_id", "window_index", "pred_class", "pred_severity", "y_tm", "y_bk", "y_dk"];

pub fn cmd_predict(cfg: &RunConfig, input: &Path, out: Option<&Path>, force: bool) -> Result<()> {
    cfg.validate()?;
    if let Some(o) = out {
        refuse_existing(o, force)?;
    }
    let model = load_bundle(&cfg.paths.model_dir)?;
    let (rec, _) = parse_imu_csv_with_rate(input, cfg.ingest.rate_hz)?;
    let (windows, drops) = unlabeled_windows(&rec, cfg.ingest.min_window_samples);
    if windows.is_empty() {
        log::warn!("{}: no window has enough samples ({} dropped)", input.display(), drops.dropped.len());
    }
    let rows = featurize_windows(&windows, &cfg.features)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(PREDICTION_HEADER).map_err(ser)?;
        for r in &rows {
            let p = model.predict_window(&r.features)?;
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                r.subject_id.clone(),
                r.window_index.to_string(),
                p.pd_class.to_string(),
                p.severity.to_string(),
                p.y_tm.to_string(),
                opt(p.y_bk),
                opt(p.y_dk),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
    }
    match out {
        Some(o) => {
            ensure_parent(o)?;
            fs::write(o, &buf).map_err(|e| Error::io(o, e))
        }
        None => std::io::stdout().write_all(&buf).map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn cmd_evaluate(cfg: &RunConfig, force: bool) -> Result<EvaluationReport> {
    cfg.validate()?;
    let dir = &cfg.paths.output_dir;
    let json_path = dir.join("report.json");
    refuse_existing(&json_path, force)?;
    let rows = read_feature_store(&cfg.paths.features)?;
    let (report, records) = if cfg.evaluate.loso {
        let mut folds = loso_folds(&rows)?;
        if let Some(n) = cfg.evaluate.folds {
            folds.truncate(n);
        }
        let out = run_loso_folds(&rows, &cfg.model, &folds, cfg.evaluate.thread_count())?;
        (out.report, out.records)
    } else {
        let model = load_bundle(&cfg.paths.model_dir)?;
        let records = predict_records(&model, &rows)?;
        (
            evaluate_records(&records, model.gate_threshold, model.decision_threshold)?,
            records,
        )
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_prediction_dump(&dir.join("predictions.csv"), &records)?;
    fs::write(&json_path, report.to_json()? + "\n").map_err(|e| Error::io(&json_path, e))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, report.to_text()).map_err(|e| Error::io(&txt, e))?;
    Ok(report)
}

/// Text (or JSON) rendering of a `report.json` or a prediction dump.
pub fn cmd_report(input: &Path, json: bool, cfg: &RunConfig) -> Result<String> {
    let is_json = input.extension().is_some_and(|e| e == "json");
    let report = if is_json {
        let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        serde_json::from_str::<EvaluationReport>(&text)
            .map_err(|e| Error::Serialization(format!("{}: {e}", input.display())))?
    } else {
        let records = read_prediction_dump(input)?;
        evaluate_records(&records, cfg.model.gate_threshold, cfg.model.decision_threshold)?
    };
    if json {
        Ok(report.to_json()? + "\n")
    } else {
        Ok(report.to_text())
    }
}
