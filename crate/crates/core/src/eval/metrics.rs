use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::round_severity;
use crate::labels::{Activity, ModelKind, PdClass};

/// One evaluated window: label, raw regressor outputs and final decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub subject_id: String,
    pub window_index: u32,
    pub activity: Activity,
    pub label_class: PdClass,
    pub label_severity: u8,
    pub y_tm: f64,
    pub y_bk: f64,
    pub y_dk: f64,
    pub pred_class: PdClass,
    pub pred_severity: u8,
}

impl PredictionRecord {
    pub fn output(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Tremor => self.y_tm,
            ModelKind::Bradykinesia => self.y_bk,
            ModelKind::Dyskinesia => self.y_dk,
        }
    }

    /// Label on the rating scale of `kind`; other classes count as 0.
    pub fn label_for(&self, kind: ModelKind) -> u8 {
        if self.label_class == kind.class() {
            self.label_severity
        } else {
            0
        }
    }

    /// Whether `kind` is scored on this window in the individual-layer mode.
    /// Layer-2 regressors assume a perfect tremor gate and skip tremor windows.
    pub fn scored_by(&self, kind: ModelKind) -> bool {
        kind == ModelKind::Tremor || self.label_class != PdClass::Tremor
    }
}

/// Report column: one activity or all windows together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Column {
    Activity(Activity),
    All,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::Activity(Activity::Other),
        Column::Activity(Activity::Sitting),
        Column::Activity(Activity::Walking),
        Column::Activity(Activity::Standing),
        Column::Activity(Activity::Lying),
        Column::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Activity(a) => a.as_str(),
            Column::All => "all",
        }
    }

    fn contains(self, a: Activity) -> bool {
        match self {
            Column::Activity(c) => c == a,
            Column::All => true,
        }
    }
}

/// A value per activity column; `None` marks a column with no windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerActivity<T> {
    pub other: Option<T>,
    pub sitting: Option<T>,
    pub walking: Option<T>,
    pub standing: Option<T>,
    pub lying: Option<T>,
    pub all: Option<T>,
}

impl<T> Default for PerActivity<T> {
    fn default() -> Self {
        PerActivity {
            other: None,
            sitting: None,
            walking: None,
            standing: None,
            lying: None,
            all: None,
        }
    }
}

impl<T> PerActivity<T> {
    pub fn get(&self, c: Column) -> Option<&T> {
        match c {
            Column::Activity(Activity::Other) => self.other.as_ref(),
            Column::Activity(Activity::Sitting) => self.sitting.as_ref(),
            Column::Activity(Activity::Walking) => self.walking.as_ref(),
            Column::Activity(Activity::Standing) => self.standing.as_ref(),
            Column::Activity(Activity::Lying) => self.lying.as_ref(),
            Column::All => self.all.as_ref(),
        }
    }

    pub fn set(&mut self, c: Column, v: Option<T>) {
        let slot = match c {
            Column::Activity(Activity::Other) => &mut self.other,
            Column::Activity(Activity::Sitting) => &mut self.sitting,
            Column::Activity(Activity::Walking) => &mut self.walking,
            Column::Activity(Activity::Standing) => &mut self.standing,
            Column::Activity(Activity::Lying) => &mut self.lying,
            Column::All => &mut self.all,
        };
        *slot = v;
    }

    /// Builds every column from the records falling into it.
    fn from_columns<'a, R: 'a>(records: &[&'a R], activity: impl Fn(&R) -> Activity, f: impl Fn(&[&'a R]) -> Option<T>) -> Self {
        let mut out = PerActivity::default();
        for c in Column::ALL {
            let sub: Vec<&R> = records.iter().copied().filter(|r| c.contains(activity(r))).collect();
            out.set(c, if sub.is_empty() { None } else { f(&sub) });
        }
        out
    }
}

/// Percent exact and within-one hits over `n` windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub exact: f64,
    pub within_one: f64,
    pub n: usize,
}

impl Accuracy {
    fn from_hits(exact: usize, within_one: usize, n: usize) -> Option<Self> {
        (n > 0).then(|| Accuracy {
            exact: 100.0 * exact as f64 / n as f64,
            within_one: 100.0 * within_one as f64 / n as f64,
            n,
        })
    }
}

/// Individual-layer accuracy of one regressor: its rounded output against
/// the label on its own rating scale.
pub fn layer_accuracy(records: &[PredictionRecord], kind: ModelKind) -> Result<PerActivity<Accuracy>> {
    let scored = scored_rounded(records, kind)?;
    Ok(PerActivity::from_columns(&scored, |r| r.activity, |sub| {
        let (mut exact, mut near) = (0, 0);
        for r in sub {
            let d = rounded(r, kind).abs_diff(r.label_for(kind));
            exact += usize::from(d == 0);
            near += usize::from(d <= 1);
        }
        Accuracy::from_hits(exact, near, sub.len())
    }))
}

/// Windows scored by `kind`, after checking every output can be rounded.
fn scored_rounded(records: &[PredictionRecord], kind: ModelKind) -> Result<Vec<&PredictionRecord>> {
    let scored: Vec<&PredictionRecord> = records.iter().filter(|r| r.scored_by(kind)).collect();
    for r in &scored {
        round_severity(r.output(kind))?;
    }
    Ok(scored)
}

fn rounded(r: &PredictionRecord, kind: ModelKind) -> u8 {
    round_severity(r.output(kind)).expect("finite output")
}

/// Contingent accuracy of the full decision, per labeled class. The
/// within-one variant still requires the right class.
pub fn total_accuracy(records: &[PredictionRecord]) -> BTreeMap<PdClass, PerActivity<Accuracy>> {
    PdClass::ALL
        .into_iter()
        .map(|c| {
            let sub: Vec<&PredictionRecord> = records.iter().filter(|r| r.label_class == c).collect();
            let cells = PerActivity::from_columns(&sub, |r| r.activity, |s| {
                let hit = |r: &&&PredictionRecord, tol: u8| {
                    r.pred_class == r.label_class && r.pred_severity.abs_diff(r.label_severity) <= tol
                };
                let exact = s.iter().filter(|r| hit(r, 0)).count();
                let near = s.iter().filter(|r| hit(r, 1)).count();
                Accuracy::from_hits(exact, near, s.len())
            });
            (c, cells)
        })
        .collect()
}

/// False negatives and false positives of one regressor's presence call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnFp {
    pub false_negatives: usize,
    pub false_positives: usize,
}

impl FnFp {
    /// FN/FP, or `+inf` when there are no false positives.
    pub fn ratio(&self) -> f64 {
        if self.false_positives == 0 {
            f64::INFINITY
        } else {
            self.false_negatives as f64 / self.false_positives as f64
        }
    }

    pub fn add(self, o: FnFp) -> FnFp {
        FnFp {
            false_negatives: self.false_negatives + o.false_negatives,
            false_positives: self.false_positives + o.false_positives,
        }
    }
}

/// Presence is a label of at least 1 on the kind's scale; predicted
/// presence an output at or above `threshold`.
pub fn fn_fp_counts(records: &[PredictionRecord], kind: ModelKind, threshold: f64) -> FnFp {
    let mut c = FnFp::default();
    for r in records.iter().filter(|r| r.scored_by(kind)) {
        let present = r.label_for(kind) >= 1;
        let predicted = r.output(kind) >= threshold;
        match (present, predicted) {
            (true, false) => c.false_negatives += 1,
            (false, true) => c.false_positives += 1,
            _ => {}
        }
    }
    c
}

pub fn fn_fp_ratio(records: &[PredictionRecord], kind: ModelKind, threshold: f64) -> f64 {
    fn_fp_counts(records, kind, threshold).ratio()
}

/// Predicted severity (rows) against labeled severity (columns).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[usize; 5]; 5],
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion(records: &[PredictionRecord], kind: ModelKind) -> Result<PerActivity<Confusion>> {
    let scored = scored_rounded(records, kind)?;
    Ok(PerActivity::from_columns(&scored, |r| r.activity, |sub| {
        let mut c = Confusion::default();
        for r in sub {
            c.counts[rounded(r, kind) as usize][r.label_for(kind).min(4) as usize] += 1;
        }
        Some(c)
    }))
}

pub(crate) fn check_record(r: &PredictionRecord) -> Result<()> {
    crate::labels::check_label(r.label_class, r.label_severity)?;
    if !(r.y_tm.is_finite() && r.y_bk.is_finite() && r.y_dk.is_finite()) {
        return Err(Error::NumericalBreakdown(format!(
            "non-finite output for {}/{}",
            r.subject_id, r.window_index
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn rec(class: PdClass, sev: u8, act: Activity, y: [f64; 3], pred: (PdClass, u8)) -> PredictionRecord {
        PredictionRecord {
            subject_id: "S".into(),
            window_index: 0,
            activity: act,
            label_class: class,
            label_severity: sev,
            y_tm: y[0],
            y_bk: y[1],
            y_dk: y[2],
            pred_class: pred.0,
            pred_severity: pred.1,
        }
    }

    #[test]
    fn layer_accuracy_examples() {
        let perfect = vec![
            rec(PdClass::Bradykinesia, 3, Activity::Sitting, [0.0, 3.0, 0.0], (PdClass::Bradykinesia, 3)),
            rec(PdClass::Balanced, 0, Activity::Sitting, [0.0, 0.1, 0.0], (PdClass::Balanced, 0)),
        ];
        let a = layer_accuracy(&perfect, ModelKind::Bradykinesia).unwrap();
        assert_eq!(a.all.unwrap().exact, 100.0);
        assert_eq!(a.all.unwrap().within_one, 100.0);
        assert!(a.walking.is_none());

        let off_by_one = vec![rec(PdClass::Bradykinesia, 3, Activity::Lying, [0.0, 2.0, 0.0], (PdClass::Bradykinesia, 2))];
        let a = layer_accuracy(&off_by_one, ModelKind::Bradykinesia).unwrap().lying.unwrap();
        assert_eq!((a.exact, a.within_one), (0.0, 100.0));

        let off_by_two = vec![rec(PdClass::Balanced, 0, Activity::Lying, [0.0, 2.0, 0.0], (PdClass::Bradykinesia, 2))];
        let a = layer_accuracy(&off_by_two, ModelKind::Bradykinesia).unwrap().all.unwrap();
        assert_eq!((a.exact, a.within_one), (0.0, 0.0));
    }

    #[test]
    fn other_classes_score_as_zero() {
        let r = vec![rec(PdClass::Dyskinesia, 3, Activity::Other, [0.0, 0.2, 3.0], (PdClass::Dyskinesia, 3))];
        assert_eq!(layer_accuracy(&r, ModelKind::Bradykinesia).unwrap().all.unwrap().exact, 100.0);
        let tremor = vec![rec(PdClass::Tremor, 2, Activity::Other, [2.0, 3.0, 3.0], (PdClass::Tremor, 2))];
        assert!(layer_accuracy(&tremor, ModelKind::Bradykinesia).unwrap().all.is_none());
        assert_eq!(layer_accuracy(&tremor, ModelKind::Tremor).unwrap().all.unwrap().exact, 100.0);
    }

    #[test]
    fn total_accuracy_examples() {
        let r = vec![
            rec(PdClass::Bradykinesia, 2, Activity::Sitting, [0.0, 2.0, 0.0], (PdClass::Bradykinesia, 2)),
            rec(PdClass::Bradykinesia, 2, Activity::Sitting, [0.0, 0.0, 2.0], (PdClass::Dyskinesia, 2)),
            rec(PdClass::Balanced, 0, Activity::Walking, [0.0, 0.0, 0.0], (PdClass::Balanced, 0)),
        ];
        let t = total_accuracy(&r);
        let bk = t[&PdClass::Bradykinesia].sitting.unwrap();
        assert_eq!((bk.exact, bk.within_one, bk.n), (50.0, 50.0, 2));
        assert_eq!(t[&PdClass::Balanced].walking.unwrap().exact, 100.0);
        assert!(t[&PdClass::Tremor].all.is_none());
    }

    #[test]
    fn fn_fp_examples() {
        let mut r = Vec::new();
        for _ in 0..10 {
            r.push(rec(PdClass::Dyskinesia, 2, Activity::Sitting, [0.0, 0.0, 0.1], (PdClass::Balanced, 0)));
            r.push(rec(PdClass::Balanced, 0, Activity::Sitting, [0.0, 0.0, 0.9], (PdClass::Dyskinesia, 1)));
        }
        assert_eq!(fn_fp_ratio(&r, ModelKind::Dyskinesia, 0.5), 1.0);
        let fp_only: Vec<_> = r.iter().filter(|x| x.label_class == PdClass::Balanced).take(5).cloned().collect();
        assert_eq!(fn_fp_ratio(&fp_only, ModelKind::Dyskinesia, 0.5), 0.0);
        let fn_only: Vec<_> = r.iter().filter(|x| x.label_class != PdClass::Balanced).take(3).cloned().collect();
        let c = fn_fp_counts(&fn_only, ModelKind::Dyskinesia, 0.5);
        assert_eq!(c, FnFp { false_negatives: 3, false_positives: 0 });
        assert_eq!(c.ratio(), f64::INFINITY);
    }

    fn arb_record() -> impl Strategy<Value = PredictionRecord> {
        (0usize..4, 1u8..=4, 0usize..5, prop::array::uniform3(-1.0f64..5.0)).prop_map(|(c, s, a, y)| {
            let class = PdClass::ALL[c];
            let sev = if class == PdClass::Balanced { 0 } else { s };
            let p = crate::hierarchy::decide(y[0], 0.5, 0.5, || Ok((y[1], y[2]))).unwrap();
            rec(class, sev, Activity::ALL[a], y, (p.pd_class, p.severity))
        })
    }

    proptest! {
        #[test]
        fn report_cell_invariants(records in prop::collection::vec(arb_record(), 1..60)) {
            let total = total_accuracy(&records);
            for kind in ModelKind::ALL {
                let layer = layer_accuracy(&records, kind).unwrap();
                let conf = confusion(&records, kind).unwrap();
                let scored = records.iter().filter(|r| r.scored_by(kind)).count();
                prop_assert_eq!(conf.all.map_or(0, |c| c.total()), scored);
                for c in Column::ALL {
                    if let Some(a) = layer.get(c) {
                        prop_assert!(a.within_one >= a.exact);
                        prop_assert!((0.0..=100.0).contains(&a.exact) && (0.0..=100.0).contains(&a.within_one));
                        prop_assert_eq!(conf.get(c).unwrap().total(), a.n);
                    }
                }
                if kind != ModelKind::Tremor {
                    let own: Vec<PredictionRecord> = records.iter().filter(|r| r.label_class == kind.class()).cloned().collect();
                    let own_layer = layer_accuracy(&own, kind).unwrap();
                    for c in Column::ALL {
                        if let (Some(t), Some(l)) = (total[&kind.class()].get(c), own_layer.get(c)) {
                            prop_assert!(t.exact <= l.exact + 1e-9);
                        }
                    }
                }
            }
        }
    }
}
