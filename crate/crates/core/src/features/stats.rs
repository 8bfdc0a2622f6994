//! Per-band statistics, log scaling and rest fractions.

use super::layout::{Sensor, Stat};
use crate::error::{Error, Result};

pub const LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandStats {
    pub std: f64,
    pub norm: f64,
    pub max: f64,
    pub rms: f64,
    /// Non-excess (a Gaussian scores 3).
    pub kurtosis: f64,
    pub skewness: f64,
    /// Set when the variance vanished and the shape moments were zeroed.
    pub zero_variance: bool,
}

impl BandStats {
    pub fn as_array(&self) -> [f64; 6] {
        [self.std, self.norm, self.max, self.rms, self.kurtosis, self.skewness]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffStats {
    pub std: f64,
    pub norm: f64,
    pub rms: f64,
}

fn population_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

pub fn band_statistics(coeffs: &[f64]) -> Result<BandStats> {
    if coeffs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "band statistics need 4 coefficients, got {}",
            coeffs.len()
        )));
    }
    let n = coeffs.len() as f64;
    let sum_sq: f64 = coeffs.iter().map(|v| v * v).sum();
    let max = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (_, m2, m3, m4) = population_moments(coeffs);
    let zero_variance = m2 <= (1e-12 * max).powi(2);
    let (kurtosis, skewness) = if zero_variance {
        (0.0, 0.0)
    } else {
        (m4 / (m2 * m2), m3 / m2.powf(1.5))
    };
    Ok(BandStats {
        std: m2.sqrt(),
        norm: sum_sq.sqrt(),
        max,
        rms: (sum_sq / n).sqrt(),
        kurtosis,
        skewness,
        zero_variance,
    })
}

/// Statistics of the index-wise first difference.
pub fn diff_statistics(coeffs: &[f64]) -> Result<DiffStats> {
    if coeffs.len() < 2 {
        return Err(Error::InsufficientData("difference needs 2 coefficients".into()));
    }
    let d: Vec<f64> = coeffs.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len() as f64;
    let sum_sq: f64 = d.iter().map(|v| v * v).sum();
    let (_, m2, _, _) = population_moments(&d);
    Ok(DiffStats {
        std: m2.sqrt(),
        norm: sum_sq.sqrt(),
        rms: (sum_sq / n).sqrt(),
    })
}

/// `ln(v + eps)` for non-negative gyroscope statistics and differentiated
/// accelerometer statistics; identity otherwise.
pub fn log_scale(v: f64, stat: Stat, sensor: Sensor) -> f64 {
    let in_log_set = sensor == Sensor::Gyr || stat.is_differentiated();
    if in_log_set && stat.is_non_negative() {
        (v + LOG_EPSILON).ln()
    } else {
        v
    }
}

/// Fraction of samples strictly below `c`.
pub fn rest_fraction(values: &[f64], c: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("rest fraction of an empty signal".into()));
    }
    let below = values.iter().filter(|v| **v < c).count();
    Ok(below as f64 / values.len() as f64)
}
