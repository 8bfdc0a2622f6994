//! Sensor and annotation CSV parsing and one-minute window assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Activity, Annotation, PdClass};

/// Accelerometer range of the wrist band, in G.
pub const ACC_RANGE_G: f64 = 8.0;
/// Gyroscope range of the wrist band, in degrees per second.
pub const GYR_RANGE_DPS: f64 = 1000.0;
pub const DEFAULT_RATE_HZ: f64 = 60.0;
pub const WINDOW_SECONDS: f64 = 60.0;
/// 10% of a full minute at 60 Hz.
pub const MIN_WINDOW_SAMPLES: usize = 360;

pub const IMU_HEADER: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];
pub const ANNOTATION_HEADER: [&str; 4] = ["window_index", "pd_class", "severity", "activity"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub acc: [f64; 3],
    pub gyr: [f64; 3],
}

impl ImuSample {
    /// Clamps to the sensor range, returning how many channels were clipped.
    pub fn clamp_to_range(&mut self) -> usize {
        let mut clipped = 0;
        for v in &mut self.acc {
            if v.abs() > ACC_RANGE_G {
                *v = v.clamp(-ACC_RANGE_G, ACC_RANGE_G);
                clipped += 1;
            }
        }
        for v in &mut self.gyr {
            if v.abs() > GYR_RANGE_DPS {
                *v = v.clamp(-GYR_RANGE_DPS, GYR_RANGE_DPS);
                clipped += 1;
            }
        }
        clipped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImuRecording {
    pub subject_id: String,
    pub nominal_rate_hz: f64,
    pub samples: Vec<ImuSample>,
}

impl ImuRecording {
    pub fn new(subject_id: impl Into<String>, nominal_rate_hz: f64, samples: Vec<ImuSample>) -> Result<Self> {
        let subject_id = subject_id.into();
        if subject_id.is_empty() {
            return Err(Error::InvalidLabel("empty subject id".into()));
        }
        if !(nominal_rate_hz > 0.0 && nominal_rate_hz.is_finite()) {
            return Err(Error::Config(format!("sampling rate must be positive, got {nominal_rate_hz}")));
        }
        if samples.is_empty() {
            return Err(Error::EmptyRecording(subject_id.clone().into()));
        }
        Ok(ImuRecording {
            subject_id,
            nominal_rate_hz,
            samples,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub clamped_values: usize,
    pub duplicate_timestamps_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSequence {
    pub subject_id: String,
    pub annotations: Vec<Annotation>,
}

impl AnnotationSequence {
    pub fn new(subject_id: impl Into<String>, mut annotations: Vec<Annotation>) -> Result<Self> {
        annotations.sort_by_key(|a| a.window_index);
        for pair in annotations.windows(2) {
            if pair[0].window_index == pair[1].window_index {
                return Err(Error::DuplicateWindow(pair[0].window_index));
            }
        }
        Ok(AnnotationSequence {
            subject_id: subject_id.into(),
            annotations,
        })
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(path: &Path, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| Error::MalformedRow {
        path: path.into(),
        row: 1,
        reason: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::MalformedRow {
            path: path.into(),
            row: 1,
            reason: format!("expected header {}, got {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Subject id from a file name such as `S01.imu.csv`.
pub fn subject_id_from_path(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.split('.').next().unwrap_or(name).to_string()
}

pub fn parse_imu_csv(path: &Path) -> Result<(ImuRecording, ParseReport)> {
    parse_imu_csv_with_rate(path, DEFAULT_RATE_HZ)
}

pub fn parse_imu_csv_with_rate(path: &Path, nominal_rate_hz: f64) -> Result<(ImuRecording, ParseReport)> {
    let text = read_to_string(path)?;
    let mut rdr = csv_reader(&text);
    check_header(path, &mut rdr, &IMU_HEADER)?;

    let mut report = ParseReport::default();
    // (t, original row) so a later ordering error can cite the source line
    let mut samples: Vec<(ImuSample, usize)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            path: path.into(),
            row,
            reason: e.to_string(),
        })?;
        if record.len() != 7 {
            return Err(Error::MalformedRow {
                path: path.into(),
                row,
                reason: format!("expected 7 fields, got {}", record.len()),
            });
        }
        let mut v = [0.0; 7];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::MalformedRow {
                    path: path.into(),
                    row,
                    reason: format!("not a finite number: {field:?}"),
                })?;
        }
        if v[0] < 0.0 {
            return Err(Error::MalformedRow {
                path: path.into(),
                row,
                reason: "negative timestamp".into(),
            });
        }
        let mut s = ImuSample {
            t: v[0],
            acc: [v[1], v[2], v[3]],
            gyr: [v[4], v[5], v[6]],
        };
        report.clamped_values += s.clamp_to_range();
        samples.push((s, row));
    }
    report.rows = samples.len();
    if samples.is_empty() {
        return Err(Error::EmptyRecording(path.into()));
    }

    samples.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));
    let mut out: Vec<ImuSample> = Vec::with_capacity(samples.len());
    for (s, row) in samples {
        if let Some(last) = out.last() {
            if s.t == last.t {
                if s == *last {
                    report.duplicate_timestamps_removed += 1;
                    continue;
                }
                return Err(Error::NonMonotoneTimestamps { path: path.into(), row });
            }
        }
        out.push(s);
    }
    let rec = ImuRecording::new(subject_id_from_path(path), nominal_rate_hz, out)?;
    Ok((rec, report))
}

pub fn parse_annotations_csv(path: &Path) -> Result<AnnotationSequence> {
    let text = read_to_string(path)?;
    let mut rdr = csv_reader(&text);
    check_header(path, &mut rdr, &ANNOTATION_HEADER)?;
    let mut anns = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            path: path.into(),
            row,
            reason: e.to_string(),
        })?;
        if record.len() != 4 {
            return Err(Error::MalformedRow {
                path: path.into(),
                row,
                reason: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let window_index: u32 = record[0].parse().map_err(|_| Error::MalformedRow {
            path: path.into(),
            row,
            reason: format!("bad window_index {:?}", &record[0]),
        })?;
        let pd_class: PdClass = record[1].parse()?;
        let severity: u8 = record[2]
            .parse()
            .map_err(|_| Error::InvalidLabel(format!("row {row}: bad severity {:?}", &record[2])))?;
        let activity: Activity = record[3].parse()?;
        if !seen.insert(window_index) {
            return Err(Error::DuplicateWindow(window_index));
        }
        anns.push(Annotation::new(window_index, pd_class, severity, activity)?);
    }
    AnnotationSequence::new(subject_id_from_path(path), anns)
}

pub fn write_imu_csv(path: &Path, rec: &ImuRecording) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let map = |e: csv::Error| Error::io(path, e.into());
    w.write_record(IMU_HEADER).map_err(map)?;
    for s in &rec.samples {
        w.write_record([
            s.t.to_string(),
            s.acc[0].to_string(),
            s.acc[1].to_string(),
            s.acc[2].to_string(),
            s.gyr[0].to_string(),
            s.gyr[1].to_string(),
            s.gyr[2].to_string(),
        ])
        .map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_annotations_csv(path: &Path, ann: &AnnotationSequence) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let map = |e: csv::Error| Error::io(path, e.into());
    w.write_record(ANNOTATION_HEADER).map_err(map)?;
    for a in &ann.annotations {
        w.write_record([
            a.window_index.to_string(),
            a.pd_class.to_string(),
            a.severity.to_string(),
            a.activity.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Samples of one minute of a recording, shared between a window and the
/// context of its neighbors.
pub type MinuteBlock = Arc<[ImuSample]>;

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject_id: String,
    pub window_index: u32,
    pub rate_hz: f64,
    pub samples: MinuteBlock,
    /// `None` for unlabeled recordings.
    pub annotation: Option<Annotation>,
    /// Sufficient minutes among k-2..=k+2 (including k), in time order.
    pub context: Vec<MinuteBlock>,
}

impl Window {
    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedWindow {
    pub window_index: u32,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub subject_id: String,
    pub dropped: Vec<DroppedWindow>,
    /// Annotated minutes with no sensor data at all.
    #[serde(default)]
    pub empty: Vec<u32>,
}

/// Sensor samples grouped by minute index `floor(t / 60)`.
pub fn split_minutes(rec: &ImuRecording) -> BTreeMap<u32, MinuteBlock> {
    let mut groups: BTreeMap<u32, Vec<ImuSample>> = BTreeMap::new();
    for s in &rec.samples {
        let k = (s.t / WINDOW_SECONDS).floor();
        if k >= 0.0 && k <= u32::MAX as f64 {
            groups.entry(k as u32).or_default().push(*s);
        }
    }
    groups.into_iter().map(|(k, v)| (k, MinuteBlock::from(v))).collect()
}

fn context_for(minutes: &BTreeMap<u32, MinuteBlock>, k: u32, min_samples: usize) -> Vec<MinuteBlock> {
    let lo = k.saturating_sub(2);
    let hi = k.saturating_add(2);
    minutes
        .range(lo..=hi)
        .filter(|(_, b)| b.len() >= min_samples)
        .map(|(_, b)| b.clone())
        .collect()
}

pub fn build_windows(rec: &ImuRecording, ann: &AnnotationSequence) -> Result<(Vec<Window>, DropReport)> {
    build_windows_with(rec, ann, MIN_WINDOW_SAMPLES)
}

pub fn build_windows_with(
    rec: &ImuRecording,
    ann: &AnnotationSequence,
    min_samples: usize,
) -> Result<(Vec<Window>, DropReport)> {
    if rec.subject_id != ann.subject_id {
        return Err(Error::SubjectMismatch {
            recording: rec.subject_id.clone(),
            annotations: ann.subject_id.clone(),
        });
    }
    let minutes = split_minutes(rec);
    let mut report = DropReport {
        subject_id: rec.subject_id.clone(),
        ..Default::default()
    };
    let mut windows = Vec::new();
    for a in &ann.annotations {
        match minutes.get(&a.window_index) {
            None => report.empty.push(a.window_index),
            Some(block) if block.len() < min_samples => report.dropped.push(DroppedWindow {
                window_index: a.window_index,
                sample_count: block.len(),
            }),
            Some(block) => windows.push(Window {
                subject_id: rec.subject_id.clone(),
                window_index: a.window_index,
                rate_hz: rec.nominal_rate_hz,
                samples: block.clone(),
                annotation: Some(*a),
                context: context_for(&minutes, a.window_index, min_samples),
            }),
        }
    }
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((windows, report))
}

/// Windows for every sufficient minute of an unlabeled recording. May be empty.
pub fn unlabeled_windows(rec: &ImuRecording, min_samples: usize) -> (Vec<Window>, DropReport) {
    let minutes = split_minutes(rec);
    let mut report = DropReport {
        subject_id: rec.subject_id.clone(),
        ..Default::default()
    };
    let mut windows = Vec::new();
    for (&k, block) in &minutes {
        if block.len() < min_samples {
            report.dropped.push(DroppedWindow {
                window_index: k,
                sample_count: block.len(),
            });
            continue;
        }
        windows.push(Window {
            subject_id: rec.subject_id.clone(),
            window_index: k,
            rate_hz: rec.nominal_rate_hz,
            samples: block.clone(),
            annotation: None,
            context: context_for(&minutes, k, min_samples),
        });
    }
    (windows, report)
}
