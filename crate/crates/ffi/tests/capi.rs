use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mlgp::features::store::FeatureRow;
use mlgp::features::{build_feature_vectors, FeatureConfig, LAYOUT_VERSION, N_FEATURES};
use mlgp::hierarchy::{save_bundle, train_multilayer, HierarchyConfig};
use mlgp::ingest::{build_windows, ImuRecording};
use mlgp::synth::{synth_cohort, CohortSpec};
use mlgp_ffi::*;

fn flatten(rec: &ImuRecording) -> Vec<f64> {
    rec.samples
        .iter()
        .flat_map(|s| [s.t, s.acc[0], s.acc[1], s.acc[2], s.gyr[0], s.gyr[1], s.gyr[2]])
        .collect()
}

fn last_error() -> String {
    let p = mlgp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn static_strings() {
    let v = unsafe { CStr::from_ptr(mlgp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let l = unsafe { CStr::from_ptr(mlgp_layout_version()) }.to_str().unwrap();
    assert_eq!(l, LAYOUT_VERSION);
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        assert_eq!(mlgp_model_load(ptr::null(), ptr::null_mut()), MlgpStatus::NullPointer);
        let mut m = ptr::null_mut();
        assert_eq!(mlgp_model_load(ptr::null(), &mut m), MlgpStatus::NullPointer);
        assert!(last_error().contains("dir"));
        let dir = CString::new("/nonexistent/bundle").unwrap();
        assert_eq!(mlgp_model_load(dir.as_ptr(), &mut m), MlgpStatus::Io);
        assert!(m.is_null());
        mlgp_model_free(ptr::null_mut());

        let mut out = [0.0; N_FEATURES];
        let s = mlgp_featurize_window(ptr::null(), 0, 60.0, 0, out.as_mut_ptr(), N_FEATURES);
        assert_eq!(s, MlgpStatus::NullPointer);
        let rows = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let s = mlgp_featurize_window(rows.as_ptr(), 1, 60.0, 0, out.as_mut_ptr(), 10);
        assert_eq!(s, MlgpStatus::BufferTooSmall);
        let s = mlgp_featurize_window(rows.as_ptr(), 1, 60.0, 0, out.as_mut_ptr(), N_FEATURES);
        assert_eq!(s, MlgpStatus::Data);
        assert!(last_error().contains("minute 0"));
        let bad = [0.0, f64::NAN, 0.0, 1.0, 0.0, 0.0, 0.0];
        let s = mlgp_featurize_window(bad.as_ptr(), 1, 60.0, 0, out.as_mut_ptr(), N_FEATURES);
        assert_eq!(s, MlgpStatus::InvalidArgument);
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    bundle: PathBuf,
    rec: ImuRecording,
    rows: Vec<FeatureRow>,
    model: mlgp::hierarchy::MultiLayerModel,
}

fn fixture() -> Fixture {
    let spec = CohortSpec::separable(3, 30, 4);
    let cohort = synth_cohort(&spec.profiles()).unwrap();
    let mut rows = Vec::new();
    for (rec, ann) in &cohort {
        let (w, _) = build_windows(rec, ann).unwrap();
        for (w, f) in w.iter().zip(build_feature_vectors(&w, &FeatureConfig::default())) {
            rows.push(FeatureRow {
                subject_id: w.subject_id.clone(),
                window_index: w.window_index,
                annotation: w.annotation,
                features: f.unwrap(),
            });
        }
    }
    let model = train_multilayer(&rows, &HierarchyConfig::default(), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("model");
    save_bundle(&model, &bundle).unwrap();
    Fixture {
        _dir: dir,
        bundle,
        rec: cohort[0].0.clone(),
        rows,
        model,
    }
}

#[test]
fn matches_core_pipeline() {
    let fx = fixture();
    let flat = flatten(&fx.rec);
    let n = fx.rec.samples.len();
    let dir = CString::new(fx.bundle.to_str().unwrap()).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(mlgp_model_load(dir.as_ptr(), &mut m), MlgpStatus::Ok);
        assert!(!m.is_null());
        for k in [0u32, 1, 2, 14, 29] {
            let row = fx.rows.iter().find(|r| r.subject_id == fx.rec.subject_id && r.window_index == k).unwrap();
            let mut out = [0.0; N_FEATURES];
            let s = mlgp_featurize_window(flat.as_ptr(), n, 60.0, k, out.as_mut_ptr(), N_FEATURES);
            assert_eq!(s, MlgpStatus::Ok, "{}", last_error());
            assert_eq!(out.to_vec(), row.features.values, "window {k}");

            let want = fx.model.predict_window(&row.features).unwrap();
            let mut p = MlgpPrediction {
                pd_class: MlgpClass::Balanced,
                severity: 0,
                y_tm: 0.0,
                y_bk: 0.0,
                y_dk: 0.0,
            };
            assert_eq!(mlgp_predict(m, out.as_ptr(), N_FEATURES, &mut p), MlgpStatus::Ok);
            assert_eq!(p.pd_class, MlgpClass::from(want.pd_class));
            assert_eq!(p.severity, want.severity);
            assert!((p.y_tm - want.y_tm).abs() <= 1e-12);
            match want.y_bk {
                Some(v) => assert!((p.y_bk - v).abs() <= 1e-12),
                None => assert!(p.y_bk.is_nan() && p.y_dk.is_nan()),
            }
            let mut q = p;
            assert_eq!(mlgp_predict_window(m, flat.as_ptr(), n, 60.0, k, &mut q), MlgpStatus::Ok);
            assert_eq!(q.pd_class, p.pd_class);
            assert_eq!(q.y_tm.to_bits(), p.y_tm.to_bits());
        }
        let short = [0.5; 10];
        let mut p = std::mem::zeroed::<MlgpPrediction>();
        assert_eq!(mlgp_predict(m, short.as_ptr(), 10, &mut p), MlgpStatus::Data);
        mlgp_model_free(m);
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("mlgp.h")).unwrap();
    for name in ["mlgp_model_load", "mlgp_model_free", "mlgp_featurize_window", "mlgp_predict", "mlgp_last_error_message"] {
        assert!(header.contains(name), "{name}");
    }
    let lib = target_dir().join("libmlgp_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link check: no cc or {}", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include <string.h>
#include "mlgp.h"

int main(void) {
    static double rows[3600 * MLGP_SAMPLE_STRIDE];
    double feats[MLGP_FEATURE_COUNT];
    MlgpModel *m = NULL;
    for (int i = 0; i < 3600; i++) {
        double t = i / 60.0;
        double *r = rows + i * MLGP_SAMPLE_STRIDE;
        r[0] = t;
        r[1] = 0.05 * sin(2 * M_PI * 5 * t);
        r[2] = 0.0;
        r[3] = 1.0;
        r[4] = 10 * cos(2 * M_PI * 5 * t);
        r[5] = 0.0;
        r[6] = 0.0;
    }
    if (mlgp_featurize_window(rows, 3600, 60.0, 0, feats, MLGP_FEATURE_COUNT) != MLGP_STATUS_OK) return 1;
    for (int i = 0; i < MLGP_FEATURE_COUNT; i++) if (!isfinite(feats[i])) return 2;
    if (mlgp_model_load("/nonexistent", &m) != MLGP_STATUS_IO || m != NULL) return 3;
    if (mlgp_last_error_message() == NULL) return 4;
    printf("%s %s\n", mlgp_version(), mlgp_layout_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(LAYOUT_VERSION));
}
