//! Signal-processing kernels used by feature extraction.

mod butterworth;
mod psd;
mod wavelet;

pub use butterworth::{bandpass_design, butterworth_bandpass, filtfilt, BandpassSpec, Biquad, SosFilter};
pub use psd::{psd, PsdEstimate};
pub use wavelet::{dwt_db3, idwt_db3, BoundaryMode, WaveletDecomposition, DB3_DEC_HI, DB3_DEC_LO};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSignal {
    pub values: Vec<f64>,
    pub rate_hz: f64,
}

impl ScalarSignal {
    pub fn new(values: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty signal".into()));
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::InvalidSpec(format!("rate must be positive, got {rate_hz}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InsufficientData(format!("non-finite sample at {i}")));
        }
        Ok(ScalarSignal { values, rate_hz })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Element-wise Euclidean norm of three equally long channels.
pub fn vector_norm(x: &ScalarSignal, y: &ScalarSignal, z: &ScalarSignal) -> Result<ScalarSignal> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() != z.len() {
        return Err(Error::LengthMismatch(x.len(), z.len()));
    }
    if x.rate_hz != y.rate_hz || x.rate_hz != z.rate_hz {
        return Err(Error::InvalidSpec("channel rates differ".into()));
    }
    let values = x
        .values
        .iter()
        .zip(&y.values)
        .zip(&z.values)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect();
    Ok(ScalarSignal {
        values,
        rate_hz: x.rate_hz,
    })
}
