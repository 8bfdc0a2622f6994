//! Three-layer decision model: a tremor gate, parallel bradykinesia and
//! dyskinesia regressors, and a balanced-versus-argmax decision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{input_dim, reduce_slice, FeatureVector, LAYOUT_VERSION, N_FEATURES};
use crate::features::store::FeatureRow;
use crate::gp::{load_model, save_model, train, GpModel, Hyperparameters, InputTransform, Inputs, TrainOptions};
use crate::labels::{Annotation, ModelKind, PdClass};

pub const BUNDLE_FORMAT: &str = "mlgp-bundle/1";
const MANIFEST: &str = "manifest.json";

/// Initial hyperparameters of each regressor.
pub fn preset_theta(kind: ModelKind) -> Hyperparameters {
    match kind {
        ModelKind::Tremor => Hyperparameters {
            theta_f: 96.83,
            theta_l: 0.23,
            theta_n: 0.50,
        },
        ModelKind::Bradykinesia => Hyperparameters {
            theta_f: 96_302_550.0,
            theta_l: 826_659.0,
            theta_n: 0.65,
        },
        ModelKind::Dyskinesia => Hyperparameters {
            theta_f: 128_741.0,
            theta_l: 2.26,
            theta_n: 0.83,
        },
    }
}

/// How feature vectors are scaled before entering the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputScaling {
    /// Raw feature values.
    None,
    /// Per-dimension z-score over the training subset, divided by `sqrt(d)`.
    #[default]
    Standardize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyConfig {
    pub gate_threshold: f64,
    pub decision_threshold: f64,
    pub theta_tremor: Hyperparameters,
    pub theta_bradykinesia: Hyperparameters,
    pub theta_dyskinesia: Hyperparameters,
    pub input_scaling: InputScaling,
    /// Clamp for standardized inputs, in standard deviations.
    pub clip_z: Option<f64>,
    pub train: TrainOptions,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            gate_threshold: 0.5,
            decision_threshold: 0.5,
            theta_tremor: preset_theta(ModelKind::Tremor),
            theta_bradykinesia: preset_theta(ModelKind::Bradykinesia),
            theta_dyskinesia: preset_theta(ModelKind::Dyskinesia),
            input_scaling: InputScaling::default(),
            clip_z: Some(3.0),
            train: TrainOptions::default(),
        }
    }
}

impl HierarchyConfig {
    pub fn theta0(&self, kind: ModelKind) -> Hyperparameters {
        match kind {
            ModelKind::Tremor => self.theta_tremor,
            ModelKind::Bradykinesia => self.theta_bradykinesia,
            ModelKind::Dyskinesia => self.theta_dyskinesia,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_thresholds(self.gate_threshold, self.decision_threshold)?;
        for k in ModelKind::ALL {
            self.theta0(k).validate()?;
        }
        if let Some(z) = self.clip_z {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::InvalidOptions(format!("clip_z must be positive, got {z}")));
            }
        }
        self.train.validate()
    }
}

fn check_thresholds(gate: f64, decision: f64) -> Result<()> {
    for (name, t) in [("gate_threshold", gate), ("decision_threshold", decision)] {
        if !(t > 0.0 && t < 4.0) {
            return Err(Error::InvalidOptions(format!("{name} must lie in (0, 4), got {t}")));
        }
    }
    Ok(())
}

/// Regression targets of one model over the windows it is defined on.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityTargets {
    pub model_kind: ModelKind,
    /// Positions in the label sequence the target is defined for.
    pub indices: Vec<usize>,
    pub y: Vec<f64>,
}

/// Tremor targets cover every window; bradykinesia and dyskinesia targets
/// cover non-tremor windows only.
pub fn build_targets(labels: &[Annotation], kind: ModelKind) -> SeverityTargets {
    let (indices, y) = labels
        .iter()
        .enumerate()
        .filter(|(_, a)| kind == ModelKind::Tremor || a.pd_class != PdClass::Tremor)
        .map(|(i, a)| (i, a.severity_for(kind) as f64))
        .unzip();
    SeverityTargets {
        model_kind: kind,
        indices,
        y,
    }
}

/// Positions of balanced windows and windows of `kind`'s class.
pub fn select_training_subset(labels: &[Annotation], kind: ModelKind) -> Result<Vec<usize>> {
    let idx: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, a)| a.pd_class == PdClass::Balanced || a.pd_class == kind.class())
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 2 {
        return Err(Error::InsufficientTrainingData {
            kind: kind.to_string(),
            count: idx.len(),
        });
    }
    Ok(idx)
}

/// Nearest integer (ties away from zero) clamped to the rating scale.
pub fn round_severity(y: f64) -> Result<u8> {
    if !y.is_finite() {
        return Err(Error::NumericalBreakdown(format!("non-finite severity estimate {y}")));
    }
    Ok(y.round().clamp(0.0, 4.0) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pd_class: PdClass,
    pub severity: u8,
    pub y_tm: f64,
    /// `None` when the tremor gate fired.
    pub y_bk: Option<f64>,
    pub y_dk: Option<f64>,
}

/// Applies layers 1 and 3 to `y_tm`, calling `layer2` for `(y_bk, y_dk)`
/// only when the gate does not fire.
pub fn decide(
    y_tm: f64,
    gate_threshold: f64,
    decision_threshold: f64,
    layer2: impl FnOnce() -> Result<(f64, f64)>,
) -> Result<Prediction> {
    let tm_sev = round_severity(y_tm)?;
    if y_tm >= gate_threshold {
        return Ok(Prediction {
            pd_class: PdClass::Tremor,
            severity: tm_sev.max(1),
            y_tm,
            y_bk: None,
            y_dk: None,
        });
    }
    let (y_bk, y_dk) = layer2()?;
    let (bk_sev, dk_sev) = (round_severity(y_bk)?, round_severity(y_dk)?);
    let (pd_class, severity) = if y_bk < decision_threshold && y_dk < decision_threshold {
        (PdClass::Balanced, 0)
    } else if y_dk >= y_bk {
        (PdClass::Dyskinesia, dk_sev.max(1))
    } else {
        (PdClass::Bradykinesia, bk_sev.max(1))
    };
    Ok(Prediction {
        pd_class,
        severity,
        y_tm,
        y_bk: Some(y_bk),
        y_dk: Some(y_dk),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLayerModel {
    pub tremor: GpModel,
    pub bradykinesia: GpModel,
    pub dyskinesia: GpModel,
    pub gate_threshold: f64,
    pub decision_threshold: f64,
    pub layout_version: String,
    /// Identifier of the training fold, if any.
    pub fold: Option<String>,
}

impl MultiLayerModel {
    pub fn gp(&self, kind: ModelKind) -> &GpModel {
        match kind {
            ModelKind::Tremor => &self.tremor,
            ModelKind::Bradykinesia => &self.bradykinesia,
            ModelKind::Dyskinesia => &self.dyskinesia,
        }
    }

    fn check_layout(&self, v: &FeatureVector) -> Result<()> {
        if v.layout_version != self.layout_version {
            return Err(Error::LayoutMismatch {
                model: self.layout_version.clone(),
                data: v.layout_version.clone(),
            });
        }
        Ok(())
    }

    /// Mean of one regressor on the full feature vector.
    pub fn model_output(&self, kind: ModelKind, values: &[f64]) -> Result<f64> {
        self.gp(kind).predict_mean(&reduce_slice(values, kind)?)
    }

    pub fn predict_window(&self, v: &FeatureVector) -> Result<Prediction> {
        self.check_layout(v)?;
        let y_tm = self.model_output(ModelKind::Tremor, &v.values)?;
        decide(y_tm, self.gate_threshold, self.decision_threshold, || {
            Ok((
                self.model_output(ModelKind::Bradykinesia, &v.values)?,
                self.model_output(ModelKind::Dyskinesia, &v.values)?,
            ))
        })
    }

    /// All three regressor outputs, regardless of the gate.
    pub fn raw_outputs(&self, v: &FeatureVector) -> Result<[f64; 3]> {
        self.check_layout(v)?;
        Ok([
            self.model_output(ModelKind::Tremor, &v.values)?,
            self.model_output(ModelKind::Bradykinesia, &v.values)?,
            self.model_output(ModelKind::Dyskinesia, &v.values)?,
        ])
    }
}

fn labeled(rows: &[FeatureRow]) -> Result<Vec<Annotation>> {
    rows.iter()
        .map(|r| {
            r.annotation.ok_or_else(|| {
                Error::InvalidLabel(format!("window {}/{} has no label", r.subject_id, r.window_index))
            })
        })
        .collect()
}

/// Trains one regressor on its class subset of `rows`.
pub fn train_layer(
    rows: &[FeatureRow],
    kind: ModelKind,
    theta0: Hyperparameters,
    scaling: InputScaling,
    clip_z: Option<f64>,
    opts: &TrainOptions,
) -> Result<GpModel> {
    let labels = labeled(rows)?;
    let subset = select_training_subset(&labels, kind)?;
    let targets = build_targets(&labels, kind);
    let y_of: std::collections::HashMap<usize, f64> = targets.indices.iter().copied().zip(targets.y).collect();
    let mut data = Vec::with_capacity(subset.len() * input_dim(kind));
    let mut y = Vec::with_capacity(subset.len());
    for &i in &subset {
        data.extend(reduce_slice(&rows[i].features.values, kind)?);
        y.push(y_of[&i]);
    }
    if !y.iter().any(|v| *v > 0.0) {
        log::warn!("{kind} training subset has no {kind} windows; the model will predict absence");
    }
    let x = Inputs::new(data, input_dim(kind))?;
    let opts = TrainOptions {
        seed: opts.seed.wrapping_add(kind as u64),
        ..opts.clone()
    };
    let mut m = match scaling {
        InputScaling::None => train(&x, &y, theta0, &opts)?,
        InputScaling::Standardize => {
            let tf = match clip_z {
                Some(z) => InputTransform::standardize_clipped(&x, z),
                None => InputTransform::standardize(&x),
            };
            let mut m = train(&tf.apply_all(&x), &y, theta0, &opts)?;
            m.transform = Some(tf);
            m
        }
    };
    m.meta.model_kind = Some(kind);
    Ok(m)
}

pub fn train_multilayer(rows: &[FeatureRow], cfg: &HierarchyConfig, fold: Option<String>) -> Result<MultiLayerModel> {
    cfg.validate()?;
    let labels = labeled(rows)?;
    if let Some(r) = rows.iter().find(|r| r.features.layout_version != LAYOUT_VERSION) {
        return Err(Error::LayoutMismatch {
            model: LAYOUT_VERSION.into(),
            data: r.features.layout_version.clone(),
        });
    }
    let first = labels.first().map(|a| a.pd_class);
    if labels.iter().all(|a| Some(a.pd_class) == first) {
        return Err(Error::InsufficientTrainingData {
            kind: format!("single class {}", first.map(|c| c.to_string()).unwrap_or_default()),
            count: labels.len(),
        });
    }
    let results: Vec<Result<GpModel>> = std::thread::scope(|s| {
        let handles: Vec<_> = ModelKind::ALL
            .iter()
            .map(|&k| s.spawn(move || train_layer(rows, k, cfg.theta0(k), cfg.input_scaling, cfg.clip_z, &cfg.train)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let mut models = results.into_iter().collect::<Result<Vec<_>>>()?;
    for m in &mut models {
        m.meta.fold = fold.clone();
    }
    let dyskinesia = models.pop().expect("three models");
    let bradykinesia = models.pop().expect("three models");
    let tremor = models.pop().expect("three models");
    Ok(MultiLayerModel {
        tremor,
        bradykinesia,
        dyskinesia,
        gate_threshold: cfg.gate_threshold,
        decision_threshold: cfg.decision_threshold,
        layout_version: LAYOUT_VERSION.into(),
        fold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleEntry {
    kind: ModelKind,
    file: String,
    input_dim: usize,
    n_train: usize,
    initial_theta: Option<Hyperparameters>,
    theta: Hyperparameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    layout_version: String,
    n_features: usize,
    gate_threshold: f64,
    decision_threshold: f64,
    fold: Option<String>,
    models: Vec<BundleEntry>,
}

fn file_name(kind: ModelKind) -> String {
    format!("{kind}.gp.json")
}

pub fn save_bundle(m: &MultiLayerModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for kind in ModelKind::ALL {
        let gp = m.gp(kind);
        save_model(gp, &m.layout_version, &dir.join(file_name(kind)))?;
        entries.push(BundleEntry {
            kind,
            file: file_name(kind),
            input_dim: gp.dim(),
            n_train: gp.n(),
            initial_theta: gp.meta.initial_theta,
            theta: gp.theta,
        });
    }
    let manifest = Manifest {
        format: BUNDLE_FORMAT.into(),
        layout_version: m.layout_version.clone(),
        n_features: N_FEATURES,
        gate_threshold: m.gate_threshold,
        decision_threshold: m.decision_threshold,
        fold: m.fold.clone(),
        models: entries,
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn load_bundle(dir: &Path) -> Result<MultiLayerModel> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(Error::Serialization(format!("unsupported bundle format {:?}", manifest.format)));
    }
    if manifest.layout_version != LAYOUT_VERSION {
        return Err(Error::LayoutMismatch {
            model: manifest.layout_version,
            data: LAYOUT_VERSION.into(),
        });
    }
    check_thresholds(manifest.gate_threshold, manifest.decision_threshold)?;
    let load = |kind: ModelKind| -> Result<GpModel> {
        let entry = manifest
            .models
            .iter()
            .find(|e| e.kind == kind)
            .ok_or_else(|| Error::Serialization(format!("bundle lacks a {kind} model")))?;
        let (gp, layout) = load_model(&dir.join(&entry.file))?;
        if layout != manifest.layout_version {
            return Err(Error::LayoutMismatch {
                model: layout,
                data: manifest.layout_version.clone(),
            });
        }
        if gp.dim() != input_dim(kind) {
            return Err(Error::DimensionMismatch {
                expected: input_dim(kind),
                got: gp.dim(),
            });
        }
        Ok(gp)
    };
    Ok(MultiLayerModel {
        tremor: load(ModelKind::Tremor)?,
        bradykinesia: load(ModelKind::Bradykinesia)?,
        dyskinesia: load(ModelKind::Dyskinesia)?,
        gate_threshold: manifest.gate_threshold,
        decision_threshold: manifest.decision_threshold,
        layout_version: manifest.layout_version,
        fold: manifest.fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Activity;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::cell::Cell;

    fn ann(class: PdClass, sev: u8) -> Annotation {
        Annotation::new(0, class, sev, Activity::Sitting).unwrap()
    }

    #[test]
    fn presets() {
        let bk = preset_theta(ModelKind::Bradykinesia);
        assert_eq!(bk.as_array(), [96302550.0, 826659.0, 0.65]);
        assert_eq!(preset_theta(ModelKind::Tremor).as_array(), [96.83, 0.23, 0.50]);
        assert_eq!(preset_theta(ModelKind::Dyskinesia).as_array(), [128741.0, 2.26, 0.83]);
    }

    #[test]
    fn targets() {
        let labels = [
            ann(PdClass::Tremor, 3),
            ann(PdClass::Balanced, 0),
            ann(PdClass::Dyskinesia, 2),
            ann(PdClass::Bradykinesia, 4),
        ];
        let tm = build_targets(&labels, ModelKind::Tremor);
        assert_eq!(tm.indices, vec![0, 1, 2, 3]);
        assert_eq!(tm.y, vec![3.0, 0.0, 0.0, 0.0]);
        let dk = build_targets(&labels, ModelKind::Dyskinesia);
        assert_eq!(dk.indices, vec![1, 2, 3]);
        assert_eq!(dk.y, vec![0.0, 2.0, 0.0]);
        let bk = build_targets(&labels, ModelKind::Bradykinesia);
        assert_eq!(bk.y, vec![0.0, 0.0, 4.0]);
        for t in [tm, dk, bk] {
            assert!(t.y.iter().all(|v| [0.0, 1.0, 2.0, 3.0, 4.0].contains(v)));
        }
    }

    #[test]
    fn subsets() {
        let labels = [
            ann(PdClass::Tremor, 3),
            ann(PdClass::Balanced, 0),
            ann(PdClass::Dyskinesia, 2),
            ann(PdClass::Bradykinesia, 4),
            ann(PdClass::Balanced, 0),
        ];
        assert_eq!(select_training_subset(&labels, ModelKind::Dyskinesia).unwrap(), vec![1, 2, 4]);
        assert_eq!(select_training_subset(&labels, ModelKind::Tremor).unwrap(), vec![0, 1, 4]);
        assert_eq!(select_training_subset(&labels, ModelKind::Bradykinesia).unwrap(), vec![1, 3, 4]);
        let only_tremor = [ann(PdClass::Tremor, 1), ann(PdClass::Tremor, 2)];
        assert!(matches!(
            select_training_subset(&only_tremor, ModelKind::Bradykinesia),
            Err(Error::InsufficientTrainingData { count: 0, .. })
        ));
    }

    #[test]
    fn rounding() {
        assert_eq!(round_severity(2.4).unwrap(), 2);
        assert_eq!(round_severity(-0.7).unwrap(), 0);
        assert_eq!(round_severity(4.9).unwrap(), 4);
        assert_eq!(round_severity(2.5).unwrap(), 3);
        assert_eq!(round_severity(0.5).unwrap(), 1);
        assert_eq!(round_severity(-0.5).unwrap(), 0);
        assert!(round_severity(f64::NAN).is_err());
        assert!(round_severity(f64::INFINITY).is_err());
    }

    fn decide_counted(t: [f64; 3], calls: &Cell<usize>) -> Prediction {
        decide(t[0], 0.5, 0.5, || {
            calls.set(calls.get() + 1);
            Ok((t[1], t[2]))
        })
        .unwrap()
    }

    #[test]
    fn decision_examples() {
        let calls = Cell::new(0);
        let p = decide_counted([2.6, 9.0, 9.0], &calls);
        assert_eq!((p.pd_class, p.severity, p.y_bk, calls.get()), (PdClass::Tremor, 3, None, 0));
        let p = decide_counted([0.2, 0.3, 0.4], &calls);
        assert_eq!((p.pd_class, p.severity), (PdClass::Balanced, 0));
        let p = decide_counted([0.2, 1.2, 2.7], &calls);
        assert_eq!((p.pd_class, p.severity), (PdClass::Dyskinesia, 3));
        assert_eq!(calls.get(), 2);
        let p = decide_counted([0.2, 0.6, 0.6], &calls);
        assert_eq!((p.pd_class, p.severity), (PdClass::Dyskinesia, 1));
        let p = decide_counted([0.5, 0.0, 0.0], &calls);
        assert_eq!((p.pd_class, p.severity), (PdClass::Tremor, 1));
    }

    #[test]
    fn decision_grid_is_total_and_consistent() {
        let calls = Cell::new(0);
        let grid: Vec<f64> = (0..=60).map(|i| -1.0 + 0.1 * i as f64).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let before = calls.get();
                    let p = decide_counted([a, b, c], &calls);
                    let evaluated = calls.get() - before;
                    assert_eq!(p.pd_class == PdClass::Balanced, p.severity == 0);
                    if a >= 0.5 {
                        assert_eq!((p.pd_class, evaluated), (PdClass::Tremor, 0));
                        assert!(p.y_bk.is_none() && p.y_dk.is_none());
                    } else {
                        assert_eq!(evaluated, 1);
                        assert_ne!(p.pd_class, PdClass::Tremor);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn gate_is_monotone(a in -1.0f64..5.0, bump in 0.0f64..3.0, b in -1.0f64..5.0, c in -1.0f64..5.0) {
            let calls = Cell::new(0);
            let p = decide_counted([a, b, c], &calls);
            let q = decide_counted([a + bump, b, c], &calls);
            if p.pd_class == PdClass::Tremor {
                prop_assert_eq!(q.pd_class, PdClass::Tremor);
            }
        }

        #[test]
        fn ties_are_deterministic(v in 0.5f64..5.0) {
            let calls = Cell::new(0);
            let p = decide_counted([0.0, v, v], &calls);
            prop_assert_eq!(p.pd_class, PdClass::Dyskinesia);
            prop_assert_eq!(p, decide_counted([0.0, v, v], &calls));
        }
    }

    pub(crate) fn toy_rows(n_per_class: usize, seed: u64) -> Vec<FeatureRow> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for (ci, class) in [PdClass::Balanced, PdClass::Tremor, PdClass::Bradykinesia, PdClass::Dyskinesia]
            .into_iter()
            .enumerate()
        {
            for k in 0..n_per_class {
                let sev = if class == PdClass::Balanced { 0 } else { 1 + (k % 4) as u8 };
                let values: Vec<f64> = (0..N_FEATURES)
                    .map(|j| if j % 4 == ci { sev as f64 } else { 0.0 } + rng.random_range(-0.1..0.1))
                    .collect();
                rows.push(FeatureRow {
                    subject_id: "T".into(),
                    window_index: rows.len() as u32,
                    annotation: Some(Annotation::new(rows.len() as u32, class, sev, Activity::Sitting).unwrap()),
                    features: FeatureVector::new(values).unwrap(),
                });
            }
        }
        rows
    }

    fn toy_config() -> HierarchyConfig {
        let t = Hyperparameters::new(2.0, 5.0, 0.1).unwrap();
        HierarchyConfig {
            theta_tremor: t,
            theta_bradykinesia: t,
            theta_dyskinesia: t,
            train: TrainOptions { max_iters: 5, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn trains_and_predicts_toy_problem() {
        let rows = toy_rows(12, 1);
        let m = train_multilayer(&rows, &toy_config(), Some("toy".into())).unwrap();
        assert_eq!([m.tremor.dim(), m.bradykinesia.dim(), m.dyskinesia.dim()], [132, 96, 96]);
        assert_eq!([m.tremor.n(), m.bradykinesia.n(), m.dyskinesia.n()], [24, 24, 24]);
        let test = toy_rows(4, 2);
        let correct = test
            .iter()
            .filter(|r| m.predict_window(&r.features).unwrap().pd_class == r.annotation.unwrap().pd_class)
            .count();
        assert!(correct >= 14, "{correct}/16");

        let dir = tempfile::tempdir().unwrap();
        save_bundle(&m, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        for r in &test {
            let a = m.raw_outputs(&r.features).unwrap();
            let b = back.raw_outputs(&r.features).unwrap();
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-12);
            }
        }
        assert_eq!(back.fold.as_deref(), Some("toy"));

        let mut stale = test[0].features.clone();
        stale.layout_version = "old".into();
        assert!(matches!(m.predict_window(&stale), Err(Error::LayoutMismatch { .. })));
    }

    #[test]
    fn single_class_rejected() {
        let rows: Vec<FeatureRow> = toy_rows(5, 1).into_iter().filter(|r| r.annotation.unwrap().pd_class == PdClass::Tremor).collect();
        assert!(matches!(train_multilayer(&rows, &toy_config(), None), Err(Error::InsufficientTrainingData { .. })));
        let mut cfg = toy_config();
        cfg.gate_threshold = 4.0;
        assert!(matches!(train_multilayer(&toy_rows(3, 1), &cfg, None), Err(Error::InvalidOptions(_))));
    }
}
