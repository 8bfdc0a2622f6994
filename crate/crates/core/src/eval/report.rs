use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};

use super::metrics::{
    check_record, confusion, fn_fp_counts, layer_accuracy, total_accuracy, Accuracy, Column, Confusion, FnFp,
    PerActivity, PredictionRecord,
};
use crate::error::{Error, Result};
use crate::labels::{ModelKind, PdClass};

/// Metrics of one LOSO fold, computed on its test subject only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: String,
    pub windows: usize,
    pub layer: BTreeMap<ModelKind, PerActivity<Accuracy>>,
    pub total: BTreeMap<PdClass, PerActivity<Accuracy>>,
    pub fn_fp: BTreeMap<ModelKind, FnFp>,
    pub confusion: BTreeMap<ModelKind, PerActivity<Confusion>>,
}

/// Threshold at which each regressor calls its class present.
pub fn presence_threshold(kind: ModelKind, gate_threshold: f64, decision_threshold: f64) -> f64 {
    match kind {
        ModelKind::Tremor => gate_threshold,
        _ => decision_threshold,
    }
}

pub fn evaluate_fold(
    fold: &str,
    records: &[PredictionRecord],
    gate_threshold: f64,
    decision_threshold: f64,
) -> Result<FoldReport> {
    for r in records {
        check_record(r)?;
    }
    let mut layer = BTreeMap::new();
    let mut fn_fp = BTreeMap::new();
    let mut conf = BTreeMap::new();
    for kind in ModelKind::ALL {
        layer.insert(kind, layer_accuracy(records, kind)?);
        let t = presence_threshold(kind, gate_threshold, decision_threshold);
        fn_fp.insert(kind, fn_fp_counts(records, kind, t));
        conf.insert(kind, confusion(records, kind)?);
    }
    Ok(FoldReport {
        fold: fold.to_string(),
        windows: records.len(),
        layer,
        total: total_accuracy(records),
        fn_fp,
        confusion: conf,
    })
}

/// Fold-level mean and sample standard deviation of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub exact_mean: f64,
    pub exact_std: f64,
    pub within_one_mean: f64,
    pub within_one_std: f64,
    /// Folds contributing to the cell.
    pub folds: usize,
    pub windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnFpSummary {
    /// Counts summed over folds.
    pub pooled: FnFp,
    #[serde(serialize_with = "ratio_as_json", deserialize_with = "deserialize_ratio")]
    pub pooled_ratio: f64,
    /// Mean of the per-fold ratios that are finite.
    pub fold_mean_ratio: Option<f64>,
    pub finite_folds: usize,
}

fn ratio_as_json<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

fn deserialize_ratio<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum R {
        N(f64),
        S(String),
    }
    match R::deserialize(d)? {
        R::N(v) => Ok(v),
        R::S(s) if s == "inf" => Ok(f64::INFINITY),
        R::S(s) => Err(serde::de::Error::custom(format!("bad ratio {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub folds: usize,
    pub windows: usize,
    pub gate_threshold: f64,
    pub decision_threshold: f64,
    pub layer: BTreeMap<ModelKind, PerActivity<CellSummary>>,
    pub total: BTreeMap<PdClass, PerActivity<CellSummary>>,
    pub fn_fp: BTreeMap<ModelKind, FnFpSummary>,
    pub per_fold: Vec<FoldReport>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize<'a>(cells: impl Iterator<Item = &'a PerActivity<Accuracy>>) -> PerActivity<CellSummary> {
    let cells: Vec<&PerActivity<Accuracy>> = cells.collect();
    let mut out = PerActivity::default();
    for c in Column::ALL {
        let present: Vec<&Accuracy> = cells.iter().filter_map(|p| p.get(c)).collect();
        if present.is_empty() {
            continue;
        }
        let (em, es) = mean_std(&present.iter().map(|a| a.exact).collect::<Vec<_>>());
        let (wm, ws) = mean_std(&present.iter().map(|a| a.within_one).collect::<Vec<_>>());
        out.set(
            c,
            Some(CellSummary {
                exact_mean: em,
                exact_std: es,
                within_one_mean: wm,
                within_one_std: ws,
                folds: present.len(),
                windows: present.iter().map(|a| a.n).sum(),
            }),
        );
    }
    out
}

/// Unweighted mean and sample standard deviation over folds; a cell missing
/// from a fold is left out of that cell's statistics.
pub fn aggregate_folds(folds: &[FoldReport], gate_threshold: f64, decision_threshold: f64) -> Result<EvaluationReport> {
    if folds.is_empty() {
        return Err(Error::InsufficientData("no fold reports to aggregate".into()));
    }
    let layer = ModelKind::ALL
        .into_iter()
        .map(|k| (k, summarize(folds.iter().filter_map(|f| f.layer.get(&k)))))
        .collect();
    let total = PdClass::ALL
        .into_iter()
        .map(|c| (c, summarize(folds.iter().filter_map(|f| f.total.get(&c)))))
        .collect();
    let fn_fp = ModelKind::ALL
        .into_iter()
        .map(|k| {
            let per: Vec<FnFp> = folds.iter().filter_map(|f| f.fn_fp.get(&k).copied()).collect();
            let pooled = per.iter().fold(FnFp::default(), |a, b| a.add(*b));
            let finite: Vec<f64> = per.iter().map(FnFp::ratio).filter(|r| r.is_finite()).collect();
            let summary = FnFpSummary {
                pooled,
                pooled_ratio: pooled.ratio(),
                fold_mean_ratio: (!finite.is_empty()).then(|| mean_std(&finite).0),
                finite_folds: finite.len(),
            };
            (k, summary)
        })
        .collect();
    Ok(EvaluationReport {
        folds: folds.len(),
        windows: folds.iter().map(|f| f.windows).sum(),
        gate_threshold,
        decision_threshold,
        layer,
        total,
        fn_fp,
        per_fold: folds.to_vec(),
    })
}

/// Groups records by test subject and reports each group as one fold.
pub fn evaluate_records(
    records: &[PredictionRecord],
    gate_threshold: f64,
    decision_threshold: f64,
) -> Result<EvaluationReport> {
    let mut by_subject: BTreeMap<&str, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_subject.entry(&r.subject_id).or_default().push(r.clone());
    }
    let folds = by_subject
        .iter()
        .map(|(s, recs)| evaluate_fold(s, recs, gate_threshold, decision_threshold))
        .collect::<Result<Vec<_>>>()?;
    aggregate_folds(&folds, gate_threshold, decision_threshold)
}

fn cell_text(c: Option<&CellSummary>) -> String {
    match c {
        Some(c) => format!(
            "{:5.1}±{:<4.1} ({:5.1}±{:<4.1})",
            c.exact_mean, c.exact_std, c.within_one_mean, c.within_one_std
        ),
        None => format!("{:^25}", "-"),
    }
}

fn table(out: &mut String, title: &str, rows: &[(String, &PerActivity<CellSummary>)]) {
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<14}", "");
    for c in Column::ALL {
        let _ = write!(out, " | {:^25}", c.name());
    }
    let _ = writeln!(out);
    for (name, cells) in rows {
        let _ = write!(out, "{name:<14}");
        for c in Column::ALL {
            let _ = write!(out, " | {}", cell_text(cells.get(c)));
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
}

impl EvaluationReport {
    /// Plain-text tables: accuracy mean±std over folds, the ±1 accuracy in
    /// parentheses, then FN/FP per regressor.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} folds, {} windows, gate {} decision {}\n",
            self.folds, self.windows, self.gate_threshold, self.decision_threshold
        );
        let layer: Vec<_> = self.layer.iter().map(|(k, v)| (k.to_string(), v)).collect();
        table(&mut out, "Individual layer accuracy [%] (±1 accuracy)", &layer);
        let total: Vec<_> = PdClass::ALL
            .iter()
            .filter_map(|c| self.total.get(c).map(|v| (c.to_string(), v)))
            .collect();
        table(&mut out, "Total accuracy [%] (±1 accuracy)", &total);
        let _ = writeln!(out, "FN/FP");
        for (k, s) in &self.fn_fp {
            let fold_mean = s.fold_mean_ratio.map_or("-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                out,
                "{:<14} pooled {:>6} (FN {}, FP {})  fold mean {} over {} folds",
                k.to_string(),
                fmt_ratio(s.pooled_ratio),
                s.pooled.false_negatives,
                s.pooled.false_positives,
                fold_mean,
                s.finite_folds
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn fmt_ratio(r: f64) -> String {
    if r.is_finite() {
        format!("{r:.2}")
    } else {
        "inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::tests::rec;
    use crate::labels::Activity;

    fn fold_with_accuracy(name: &str, hits: usize, n: usize) -> FoldReport {
        let records: Vec<PredictionRecord> = (0..n)
            .map(|i| {
                let y = if i < hits { 2.0 } else { 0.0 };
                let p = if i < hits { (PdClass::Bradykinesia, 2) } else { (PdClass::Balanced, 0) };
                let mut r = rec(PdClass::Bradykinesia, 2, Activity::Sitting, [0.0, y, 0.0], p);
                r.subject_id = name.into();
                r
            })
            .collect();
        evaluate_fold(name, &records, 0.5, 0.5).unwrap()
    }

    #[test]
    fn folds_are_weighted_equally() {
        let a = fold_with_accuracy("A", 60, 100);
        let b = fold_with_accuracy("B", 720, 900);
        let r = aggregate_folds(&[a, b], 0.5, 0.5).unwrap();
        let c = r.layer[&ModelKind::Bradykinesia].all.unwrap();
        assert!((c.exact_mean - 70.0).abs() < 1e-12);
        assert!((c.exact_std - (200.0f64).sqrt()).abs() < 1e-9);
        assert_eq!(c.windows, 1000);
    }

    #[test]
    fn single_fold_has_zero_std() {
        let r = aggregate_folds(&[fold_with_accuracy("A", 3, 4)], 0.5, 0.5).unwrap();
        assert_eq!(r.layer[&ModelKind::Bradykinesia].all.unwrap().exact_std, 0.0);
    }

    #[test]
    fn absent_cells_are_skipped() {
        let a = fold_with_accuracy("A", 1, 2);
        let mut recs = vec![rec(PdClass::Balanced, 0, Activity::Lying, [0.0; 3], (PdClass::Balanced, 0))];
        recs[0].subject_id = "B".into();
        let b = evaluate_fold("B", &recs, 0.5, 0.5).unwrap();
        let r = aggregate_folds(&[a, b], 0.5, 0.5).unwrap();
        let bk = &r.layer[&ModelKind::Bradykinesia];
        assert_eq!(bk.lying.unwrap().folds, 1);
        assert_eq!(bk.sitting.unwrap().folds, 1);
        assert_eq!(bk.all.unwrap().folds, 2);
        assert!(r.total[&PdClass::Tremor].all.is_none());
    }

    #[test]
    fn empty_aggregate_rejected() {
        assert!(aggregate_folds(&[], 0.5, 0.5).is_err());
    }

    #[test]
    fn json_round_trip_keeps_infinite_ratio() {
        let r = aggregate_folds(&[fold_with_accuracy("A", 1, 4)], 0.5, 0.5).unwrap();
        assert_eq!(r.fn_fp[&ModelKind::Bradykinesia].pooled_ratio, f64::INFINITY);
        let json = r.to_json().unwrap();
        assert!(json.contains("\"inf\""));
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let text = r.to_text();
        assert!(text.contains("bradykinesia") && text.contains("inf"));
    }

    #[test]
    fn grouping_by_subject_is_deterministic() {
        let mut recs = Vec::new();
        for (s, y) in [("B", 1.0), ("A", 0.0), ("B", 0.0)] {
            let mut r = rec(PdClass::Bradykinesia, 1, Activity::Walking, [0.0, y, 0.0], (PdClass::Balanced, 0));
            r.subject_id = s.into();
            recs.push(r);
        }
        let r1 = evaluate_records(&recs, 0.5, 0.5).unwrap();
        recs.reverse();
        let r2 = evaluate_records(&recs, 0.5, 0.5).unwrap();
        assert_eq!(r1.to_json().unwrap(), r2.to_json().unwrap());
        assert_eq!(r1.per_fold.iter().map(|f| f.fold.as_str()).collect::<Vec<_>>(), ["A", "B"]);
    }
}
