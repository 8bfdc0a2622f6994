use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::thread;

use super::metrics::{check_record, PredictionRecord};
use super::report::{evaluate_fold, aggregate_folds, EvaluationReport, FoldReport};
use crate::error::{Error, Result};
use crate::features::store::FeatureRow;
use crate::hierarchy::{train_multilayer, HierarchyConfig, MultiLayerModel};

pub const DUMP_HEADER: [&str; 10] = [
    "subject_id",
    "window_index",
    "activity",
    "label_class",
    "label_severity",
    "y_tm",
    "y_bk",
    "y_dk",
    "pred_class",
    "pred_severity",
];

/// Test subject of each fold, sorted.
pub fn loso_folds(rows: &[FeatureRow]) -> Result<Vec<String>> {
    let subjects: BTreeSet<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
    if subjects.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    Ok(subjects.into_iter().map(String::from).collect())
}

/// Predicts every labeled row. All three outputs are kept even when the
/// tremor gate fires.
pub fn predict_records(model: &MultiLayerModel, rows: &[FeatureRow]) -> Result<Vec<PredictionRecord>> {
    rows.iter()
        .filter_map(|r| r.annotation.map(|a| (r, a)))
        .map(|(r, a)| {
            let p = model.predict_window(&r.features)?;
            let [y_tm, y_bk, y_dk] = model.raw_outputs(&r.features)?;
            Ok(PredictionRecord {
                subject_id: r.subject_id.clone(),
                window_index: r.window_index,
                activity: a.activity,
                label_class: a.pd_class,
                label_severity: a.severity,
                y_tm,
                y_bk,
                y_dk,
                pred_class: p.pd_class,
                pred_severity: p.severity,
            })
        })
        .collect()
}

fn run_fold(rows: &[FeatureRow], subject: &str, cfg: &HierarchyConfig) -> Result<(FoldReport, Vec<PredictionRecord>)> {
    let (test, train): (Vec<FeatureRow>, Vec<FeatureRow>) =
        rows.iter().cloned().partition(|r| r.subject_id == subject);
    let model = train_multilayer(&train, cfg, Some(subject.to_string()))?;
    let records = predict_records(&model, &test)?;
    let report = evaluate_fold(subject, &records, cfg.gate_threshold, cfg.decision_threshold)?;
    Ok((report, records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosoOutcome {
    pub report: EvaluationReport,
    /// Test-set predictions of every fold, in fold order.
    pub records: Vec<PredictionRecord>,
}

/// Leave-one-subject-out evaluation. Folds run on up to `threads` worker
/// threads; results do not depend on the thread count.
pub fn run_loso(rows: &[FeatureRow], cfg: &HierarchyConfig, threads: usize) -> Result<LosoOutcome> {
    run_loso_folds(rows, cfg, &loso_folds(rows)?, threads)
}

/// Runs the folds whose test subjects are `folds`; training still uses every
/// other subject in `rows`.
pub fn run_loso_folds(rows: &[FeatureRow], cfg: &HierarchyConfig, folds: &[String], threads: usize) -> Result<LosoOutcome> {
    cfg.validate()?;
    if folds.is_empty() {
        return Err(Error::InsufficientData("no folds to run".into()));
    }
    let threads = threads.max(1).min(folds.len());
    let mut results: Vec<Option<Result<(FoldReport, Vec<PredictionRecord>)>>> = (0..folds.len()).map(|_| None).collect();
    thread::scope(|s| {
        let chunks: Vec<_> = results.chunks_mut(folds.len().div_ceil(threads)).collect();
        let mut start = 0;
        for chunk in chunks {
            let names = &folds[start..start + chunk.len()];
            start += chunk.len();
            s.spawn(move || {
                for (slot, name) in chunk.iter_mut().zip(names) {
                    log::info!("fold {name}: training");
                    *slot = Some(run_fold(rows, name, cfg));
                }
            });
        }
    });
    let mut reports = Vec::with_capacity(folds.len());
    let mut records = Vec::new();
    for (name, r) in folds.iter().zip(results) {
        let (rep, recs) = r.expect("every fold slot is filled").map_err(|e| Error::Fold {
            fold: name.clone(),
            source: Box::new(e),
        })?;
        reports.push(rep);
        records.extend(recs);
    }
    let report = aggregate_folds(&reports, cfg.gate_threshold, cfg.decision_threshold)?;
    Ok(LosoOutcome { report, records })
}

pub fn write_prediction_dump(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let ser = |e: csv::Error| Error::Serialization(format!("{}: {e}", path.display()));
    w.write_record(DUMP_HEADER).map_err(ser)?;
    for r in records {
        w.write_record([
            r.subject_id.clone(),
            r.window_index.to_string(),
            r.activity.to_string(),
            r.label_class.to_string(),
            r.label_severity.to_string(),
            r.y_tm.to_string(),
            r.y_bk.to_string(),
            r.y_dk.to_string(),
            r.pred_class.to_string(),
            r.pred_severity.to_string(),
        ])
        .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_prediction_dump(path: &Path) -> Result<Vec<PredictionRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(f));
    let bad = |row: usize, reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let header = rd.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().ne(DUMP_HEADER) {
        return Err(bad(1, format!("expected header {}", DUMP_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| bad(row, e.to_string()))?;
        if rec.len() != DUMP_HEADER.len() {
            return Err(bad(row, format!("expected {} fields, got {}", DUMP_HEADER.len(), rec.len())));
        }
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| bad(row, format!("{}: {e}", DUMP_HEADER[j])))
        };
        let int = |j: usize| -> Result<u32> {
            rec[j].parse::<u32>().map_err(|e| bad(row, format!("{}: {e}", DUMP_HEADER[j])))
        };
        let sev = |j: usize| -> Result<u8> {
            u8::try_from(int(j)?).map_err(|e| bad(row, format!("{}: {e}", DUMP_HEADER[j])))
        };
        let r = PredictionRecord {
            subject_id: rec[0].to_string(),
            window_index: int(1)?,
            activity: rec[2].parse().map_err(|e: Error| bad(row, e.to_string()))?,
            label_class: rec[3].parse().map_err(|e: Error| bad(row, e.to_string()))?,
            label_severity: sev(4)?,
            y_tm: num(5)?,
            y_bk: num(6)?,
            y_dk: num(7)?,
            pred_class: rec[8].parse().map_err(|e: Error| bad(row, e.to_string()))?,
            pred_severity: sev(9)?,
        };
        check_record(&r).map_err(|e| bad(row, e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}
