use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ScalarSignal;
use crate::error::{Error, Result};

/// One-sided power spectral density in (signal units)^2 / Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        if self.freqs_hz.len() > 1 {
            self.freqs_hz[1] - self.freqs_hz[0]
        } else {
            0.0
        }
    }

    /// Rectangle-rule integral of the density over all bins.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.bin_width()
    }

    /// Mean density over bins with `lo <= f <= hi`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> f64 {
        let (sum, n) = self
            .freqs_hz
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn argmax(&self) -> Option<usize> {
        self.power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
    }
}

/// Welch estimate: periodic Hann segments of `segment_s` seconds with 50%
/// overlap, each segment mean-removed.
pub fn psd(sig: &ScalarSignal, segment_s: f64) -> Result<PsdEstimate> {
    let nseg = (segment_s * sig.rate_hz).round() as usize;
    if nseg < 2 {
        return Err(Error::InvalidSpec(format!("segment of {segment_s} s is too short")));
    }
    if sig.len() < nseg {
        return Err(Error::SignalTooShort {
            len: sig.len(),
            min: nseg,
        });
    }
    let step = nseg / 2;
    let window: Vec<f64> = (0..nseg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / nseg as f64).cos())
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nseg);
    let nbins = nseg / 2 + 1;
    let mut acc = vec![0.0; nbins];
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    let mut count = 0usize;
    let mut start = 0;
    while start + nseg <= sig.len() {
        let seg = &sig.values[start..start + nseg];
        let mean = seg.iter().sum::<f64>() / nseg as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (sig.rate_hz * win_energy * count as f64);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (nseg % 2 == 0 && k == nseg / 2) { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs_hz = (0..nbins).map(|k| k as f64 * sig.rate_hz / nseg as f64).collect();
    Ok(PsdEstimate { freqs_hz, power })
}
