use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::layout::{
    band_index, retained_indices, Band, Sensor, Stat, LAYOUT_VERSION, N_FEATURES, REST_BASE, REST_THRESHOLDS,
    SPECTRAL_BASE,
};
use super::stats::{band_statistics, diff_statistics, log_scale, rest_fraction};
use crate::dsp::{bandpass_design, dwt_db3, filtfilt, psd, BandpassSpec, BoundaryMode, ScalarSignal};
use crate::error::{Error, Result};
use crate::ingest::{ImuSample, MinuteBlock, Window};
use crate::labels::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub smoothing: BandpassSpec,
    pub spectral: BandpassSpec,
    pub psd_segment_s: f64,
    pub peak_halfwidth_hz: f64,
    pub wavelet_mode: BoundaryMode,
    pub acc_rest_thresholds_g: [f64; REST_THRESHOLDS],
    pub gyr_rest_thresholds_dps: [f64; REST_THRESHOLDS],
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            smoothing: BandpassSpec::new(0.1, 20.0, 4),
            spectral: BandpassSpec::new(0.2, 4.0, 4),
            psd_segment_s: 4.0,
            peak_halfwidth_hz: 0.25,
            wavelet_mode: BoundaryMode::Symmetric,
            acc_rest_thresholds_g: [0.10, 0.15, 0.20, 0.25, 0.30],
            gyr_rest_thresholds_dps: [1.00, 1.25, 1.50, 1.75, 2.00],
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        self.smoothing.validate(rate_hz)?;
        self.spectral.validate(rate_hz)?;
        for t in [&self.acc_rest_thresholds_g, &self.gyr_rest_thresholds_dps] {
            if t[0] <= 0.0 || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!("rest thresholds must be positive and ascending: {t:?}")));
            }
        }
        if !(self.psd_segment_s > 0.0 && self.peak_halfwidth_hz >= 0.0) {
            return Err(Error::Config("psd segment and peak half-width must be positive".into()));
        }
        Ok(())
    }

    fn rest_thresholds(&self, sensor: Sensor) -> &[f64; REST_THRESHOLDS] {
        match sensor {
            Sensor::Acc => &self.acc_rest_thresholds_g,
            Sensor::Gyr => &self.gyr_rest_thresholds_dps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout_version: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_FEATURES {
            return Err(Error::DimensionMismatch {
                expected: N_FEATURES,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::FeatureComputationFailed { index });
        }
        Ok(FeatureVector {
            values,
            layout_version: LAYOUT_VERSION.to_string(),
        })
    }
}

/// Spectral peak of a signal: the largest PSD value and the mean PSD within
/// `halfwidth_hz` of its frequency.
pub fn psd_peak(sig: &ScalarSignal, segment_s: f64, halfwidth_hz: f64) -> Result<(f64, f64)> {
    let p = psd(sig, segment_s)?;
    let Some(k) = p.argmax() else { return Ok((0.0, 0.0)) };
    let peak = p.power[k];
    if peak <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let f0 = p.freqs_hz[k];
    let tol = 1e-9 * p.bin_width();
    let (sum, n) = p
        .freqs_hz
        .iter()
        .zip(&p.power)
        .filter(|(f, _)| (**f - f0).abs() <= halfwidth_hz + tol)
        .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
    Ok((peak, sum / n as f64))
}

/// Band-limits `sig` to the spectral band and returns
/// `(peak_power, mean_power_at_peak)`.
pub fn spectral_peak_features(sig: &ScalarSignal, cfg: &FeatureConfig) -> Result<(f64, f64)> {
    let filter = bandpass_design(&cfg.spectral, sig.rate_hz)?;
    let values = filtfilt(&filter, &sig.values, cfg.spectral.pad_len())?;
    psd_peak(
        &ScalarSignal {
            values,
            rate_hz: sig.rate_hz,
        },
        cfg.psd_segment_s,
        cfg.peak_halfwidth_hz,
    )
}

/// Per-axis zero-phase band-pass of one sensor followed by the vector norm.
fn filtered_norm(samples: &[ImuSample], sensor: Sensor, spec: &BandpassSpec, rate_hz: f64) -> Result<Vec<f64>> {
    let filter = bandpass_design(spec, rate_hz)?;
    let mut axes = Vec::with_capacity(3);
    for axis in 0..3 {
        let raw: Vec<f64> = samples
            .iter()
            .map(|s| match sensor {
                Sensor::Acc => s.acc[axis],
                Sensor::Gyr => s.gyr[axis],
            })
            .collect();
        axes.push(filtfilt(&filter, &raw, spec.pad_len())?);
    }
    Ok((0..samples.len())
        .map(|i| (axes[0][i] * axes[0][i] + axes[1][i] * axes[1][i] + axes[2][i] * axes[2][i]).sqrt())
        .collect())
}

/// Smoothed norm signals of one minute, `[acc, gyr]`.
pub fn minute_norms(samples: &[ImuSample], rate_hz: f64, cfg: &FeatureConfig) -> Result<[Vec<f64>; 2]> {
    Ok([
        filtered_norm(samples, Sensor::Acc, &cfg.smoothing, rate_hz)?,
        filtered_norm(samples, Sensor::Gyr, &cfg.smoothing, rate_hz)?,
    ])
}

pub fn build_feature_vector(w: &Window, cfg: &FeatureConfig) -> Result<FeatureVector> {
    cfg.validate(w.rate_hz)?;
    let own = minute_norms(&w.samples, w.rate_hz, cfg)?;
    let mut context = Vec::with_capacity(w.context.len());
    let mut saw_self = false;
    for block in &w.context {
        if Arc::ptr_eq(block, &w.samples) {
            saw_self = true;
            context.push(own.clone());
        } else {
            context.push(minute_norms(block, w.rate_hz, cfg)?);
        }
    }
    if !saw_self {
        context.push(own.clone());
    }
    assemble(w, &own, &context.iter().collect::<Vec<_>>(), cfg)
}

/// Featurizes many windows, smoothing each distinct minute once.
pub fn build_feature_vectors(windows: &[Window], cfg: &FeatureConfig) -> Vec<Result<FeatureVector>> {
    let mut cache: HashMap<*const ImuSample, Rc<[Vec<f64>; 2]>> = HashMap::new();
    let mut norms = |block: &MinuteBlock, rate: f64| -> Result<Rc<[Vec<f64>; 2]>> {
        if let Some(n) = cache.get(&block.as_ptr()) {
            return Ok(n.clone());
        }
        let n = Rc::new(minute_norms(block, rate, cfg)?);
        cache.insert(block.as_ptr(), n.clone());
        Ok(n)
    };
    windows
        .iter()
        .map(|w| {
            cfg.validate(w.rate_hz)?;
            let own = norms(&w.samples, w.rate_hz)?;
            let mut context = w
                .context
                .iter()
                .map(|b| norms(b, w.rate_hz))
                .collect::<Result<Vec<_>>>()?;
            if !w.context.iter().any(|b| Arc::ptr_eq(b, &w.samples)) {
                context.push(own.clone());
            }
            assemble(w, &own, &context.iter().map(|c| &**c).collect::<Vec<_>>(), cfg)
        })
        .collect()
}

fn assemble(w: &Window, own: &[Vec<f64>; 2], context: &[&[Vec<f64>; 2]], cfg: &FeatureConfig) -> Result<FeatureVector> {
    let rate = w.rate_hz;
    let mut out = vec![0.0; N_FEATURES];
    for (si, sensor) in Sensor::ALL.into_iter().enumerate() {
        let delta = &own[si];
        let dec = dwt_db3(&ScalarSignal::new(delta.clone(), rate)?, 9, cfg.wavelet_mode)?;
        for (bi, band) in Band::ALL.into_iter().enumerate() {
            let coeffs: &[f64] = match band {
                Band::Raw => delta,
                Band::Level(l) => dec.detail(l as usize).expect("nine levels decomposed"),
            };
            let b = band_statistics(coeffs)?;
            let d = diff_statistics(coeffs)?;
            let raw = [b.std, b.norm, b.max, b.rms, b.kurtosis, b.skewness, d.std, d.norm, d.rms];
            for (ki, stat) in Stat::ALL.into_iter().enumerate() {
                out[band_index(sensor, bi, ki)] = log_scale(raw[ki], stat, sensor);
            }
        }

        let five: Vec<f64> = context.iter().flat_map(|c| c[si].iter().copied()).collect();
        for (ti, &c) in cfg.rest_thresholds(sensor).iter().enumerate() {
            let base = REST_BASE + si * REST_THRESHOLDS * 2 + ti * 2;
            out[base] = rest_fraction(delta, c)?;
            out[base + 1] = rest_fraction(&five, c)?;
        }

        let spectral_norm = filtered_norm(&w.samples, sensor, &cfg.spectral, rate)?;
        let (peak, mean_at_peak) = psd_peak(
            &ScalarSignal::new(spectral_norm, rate)?,
            cfg.psd_segment_s,
            cfg.peak_halfwidth_hz,
        )?;
        out[SPECTRAL_BASE + si * 2] = peak;
        out[SPECTRAL_BASE + si * 2 + 1] = mean_at_peak;
    }
    FeatureVector::new(out)
}

/// Projects the full vector onto the inputs of `kind`'s model.
pub fn reduce_features(v: &FeatureVector, kind: ModelKind) -> Result<Vec<f64>> {
    reduce_slice(&v.values, kind)
}

pub fn reduce_slice(values: &[f64], kind: ModelKind) -> Result<Vec<f64>> {
    if values.len() != N_FEATURES {
        return Err(Error::DimensionMismatch {
            expected: N_FEATURES,
            got: values.len(),
        });
    }
    Ok(retained_indices(kind).into_iter().map(|i| values[i]).collect())
}
