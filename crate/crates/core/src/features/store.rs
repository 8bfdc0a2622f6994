//! CSV feature store with a JSON layout sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::layout::{FeatureLayout, LAYOUT_VERSION, N_FEATURES};
use super::FeatureVector;
use crate::error::{Error, Result};
use crate::labels::{check_label, Activity, Annotation, PdClass};

const LABEL_COLUMNS: [&str; 5] = ["subject_id", "window_index", "activity", "pd_class", "severity"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject_id: String,
    pub window_index: u32,
    pub annotation: Option<Annotation>,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSidecar {
    pub layout: FeatureLayout,
    pub rows: usize,
}

pub fn sidecar_path(store: &Path) -> PathBuf {
    let mut name = store.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".layout.json");
    store.with_file_name(name)
}

fn header() -> Vec<String> {
    LABEL_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..N_FEATURES).map(|i| format!("f_{i}")))
        .collect()
}

/// Writes the store and its sidecar. Values use the shortest exact decimal
/// representation, so reading them back is lossless.
pub fn write_feature_store(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let map = |e: csv::Error| Error::Serialization(format!("{}: {e}", path.display()));
    w.write_record(header()).map_err(map)?;
    for r in rows {
        if r.features.layout_version != LAYOUT_VERSION {
            return Err(Error::LayoutMismatch {
                model: LAYOUT_VERSION.into(),
                data: r.features.layout_version.clone(),
            });
        }
        let mut rec = vec![r.subject_id.clone(), r.window_index.to_string()];
        match &r.annotation {
            Some(a) => rec.extend([a.activity.to_string(), a.pd_class.to_string(), a.severity.to_string()]),
            None => rec.extend([String::new(), String::new(), String::new()]),
        }
        rec.extend(r.features.values.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let sidecar = LayoutSidecar {
        layout: FeatureLayout::canonical(),
        rows: rows.len(),
    };
    let f = File::create(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &sidecar).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn read_feature_store(path: &Path) -> Result<Vec<FeatureRow>> {
    let side = sidecar_path(path);
    let f = File::open(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: LayoutSidecar = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Serialization(format!("{}: {e}", side.display())))?;
    if sidecar.layout != FeatureLayout::canonical() {
        return Err(Error::LayoutMismatch {
            model: LAYOUT_VERSION.into(),
            data: sidecar.layout.version,
        });
    }

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let malformed = |row: usize, reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let got: Vec<String> = r
        .headers()
        .map_err(|e| malformed(0, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header() {
        return Err(Error::LayoutMismatch {
            model: LAYOUT_VERSION.into(),
            data: format!("{} columns in header", got.len()),
        });
    }

    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| malformed(row, e.to_string()))?;
        let window_index: u32 = rec[1].parse().map_err(|_| malformed(row, "bad window_index".into()))?;
        let annotation = if rec[3].is_empty() {
            None
        } else {
            let activity: Activity = rec[2].parse()?;
            let pd_class: PdClass = rec[3].parse()?;
            let severity: u8 = rec[4].parse().map_err(|_| malformed(row, "bad severity".into()))?;
            check_label(pd_class, severity)?;
            Some(Annotation {
                window_index,
                pd_class,
                severity,
                activity,
            })
        };
        let values = (5..rec.len())
            .map(|j| rec[j].parse::<f64>().map_err(|_| malformed(row, format!("bad value in column {j}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            subject_id: rec[0].to_string(),
            window_index,
            annotation,
            features: FeatureVector::new(values)?,
        });
    }
    Ok(rows)
}
