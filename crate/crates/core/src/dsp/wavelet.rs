//! Daubechies-3 discrete wavelet transform (dyadic Mallat cascade).
//!
//! Level `i` details at sampling rate `fs` cover roughly `fs/2^(i+1)..fs/2^i`.

use serde::{Deserialize, Serialize};

use super::ScalarSignal;
use crate::error::{Error, Result};

/// db3 decomposition low-pass, in convolution order.
pub const DB3_DEC_LO: [f64; 6] = [
    0.03522629188570956,
    -0.08544127388202666,
    -0.13501102001025464,
    0.45987750211849154,
    0.8068915093110928,
    0.3326705529500827,
];

/// Quadrature mirror of [`DB3_DEC_LO`].
pub const DB3_DEC_HI: [f64; 6] = [
    -0.3326705529500827,
    0.8068915093110928,
    -0.45987750211849154,
    -0.13501102001025464,
    0.08544127388202666,
    0.03522629188570956,
];

const TAPS: usize = DB3_DEC_LO.len();
/// Output phase of the periodized transform, aligned with PyWavelets.
const PERIODIC_SHIFT: isize = TAPS as isize / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Half-sample symmetric extension; output length `floor((n + 5) / 2)`.
    #[default]
    Symmetric,
    /// Circular convolution; output length `ceil(n / 2)`, odd inputs repeat
    /// their last sample.
    Periodized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    /// `details[i - 1]` holds level `i`.
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    /// Input length of every stage, for exact inversion.
    pub input_lengths: Vec<usize>,
    pub mode: BoundaryMode,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn detail(&self, level: usize) -> Option<&[f64]> {
        level.checked_sub(1).and_then(|i| self.details.get(i)).map(Vec::as_slice)
    }
}

#[inline]
fn symmetric_index(m: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let r = m.rem_euclid(period) as usize;
    if r < n {
        r
    } else {
        2 * n - 1 - r
    }
}

fn analysis_step(x: &[f64], mode: BoundaryMode) -> (Vec<f64>, Vec<f64>) {
    match mode {
        BoundaryMode::Symmetric => {
            let n = x.len();
            let out_len = (n + TAPS - 1) / 2;
            let mut lo = Vec::with_capacity(out_len);
            let mut hi = Vec::with_capacity(out_len);
            for o in 0..out_len {
                let centre = 2 * o as isize + 1;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..TAPS {
                    let m = centre - j as isize;
                    let v = if m >= 0 && (m as usize) < n { x[m as usize] } else { x[symmetric_index(m, n)] };
                    a += DB3_DEC_LO[j] * v;
                    d += DB3_DEC_HI[j] * v;
                }
                lo.push(a);
                hi.push(d);
            }
            (lo, hi)
        }
        BoundaryMode::Periodized => {
            let mut ext;
            let x = if x.len() % 2 == 1 {
                ext = x.to_vec();
                ext.push(*x.last().unwrap());
                &ext[..]
            } else {
                x
            };
            let n = x.len() as isize;
            let out_len = x.len() / 2;
            let mut lo = Vec::with_capacity(out_len);
            let mut hi = Vec::with_capacity(out_len);
            for o in 0..out_len {
                let centre = 2 * o as isize + PERIODIC_SHIFT;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..TAPS {
                    let v = x[(centre - j as isize).rem_euclid(n) as usize];
                    a += DB3_DEC_LO[j] * v;
                    d += DB3_DEC_HI[j] * v;
                }
                lo.push(a);
                hi.push(d);
            }
            (lo, hi)
        }
    }
}

fn synthesis_step(lo: &[f64], hi: &[f64], out_len: usize, mode: BoundaryMode) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    match mode {
        BoundaryMode::Symmetric => {
            for (m, slot) in out.iter_mut().enumerate() {
                // coefficient o touches positions 2o+1-j, j in 0..TAPS
                let o_min = m.saturating_sub(1).div_ceil(2);
                let o_max = (m + TAPS - 2) / 2;
                let mut acc = 0.0;
                for o in o_min..=o_max.min(lo.len() - 1) {
                    let j = 2 * o + 1 - m;
                    if j < TAPS {
                        acc += DB3_DEC_LO[j] * lo[o] + DB3_DEC_HI[j] * hi[o];
                    }
                }
                *slot = acc;
            }
            out
        }
        BoundaryMode::Periodized => {
            let n = 2 * lo.len();
            let mut full = vec![0.0; n];
            for o in 0..lo.len() {
                for j in 0..TAPS {
                    let m = (2 * o as isize + PERIODIC_SHIFT - j as isize).rem_euclid(n as isize) as usize;
                    full[m] += DB3_DEC_LO[j] * lo[o] + DB3_DEC_HI[j] * hi[o];
                }
            }
            full.truncate(out_len);
            full
        }
    }
}

/// Decomposes `sig` into details `1..=max_level` and the final approximation.
///
/// Fails with `DecompositionTooDeep` when a stage input is shorter than the
/// six-tap filter support.
pub fn dwt_db3(sig: &ScalarSignal, max_level: usize, mode: BoundaryMode) -> Result<WaveletDecomposition> {
    if max_level == 0 {
        return Err(Error::DecompositionTooDeep { level: 0, len: sig.len() });
    }
    let mut approx = sig.values.clone();
    let mut details = Vec::with_capacity(max_level);
    let mut input_lengths = Vec::with_capacity(max_level);
    for level in 1..=max_level {
        if approx.len() < TAPS {
            return Err(Error::DecompositionTooDeep {
                level,
                len: approx.len(),
            });
        }
        input_lengths.push(approx.len());
        let (lo, hi) = analysis_step(&approx, mode);
        details.push(hi);
        approx = lo;
    }
    Ok(WaveletDecomposition {
        details,
        approximation: approx,
        input_lengths,
        mode,
    })
}

pub fn idwt_db3(dec: &WaveletDecomposition) -> Vec<f64> {
    let mut approx = dec.approximation.clone();
    for level in (0..dec.details.len()).rev() {
        approx = synthesis_step(&approx, &dec.details[level], dec.input_lengths[level], dec.mode);
    }
    approx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn closed_form_db3() -> [f64; 6] {
        let s10 = 10f64.sqrt();
        let r = (5.0 + 2.0 * s10).sqrt();
        let k = 2f64.sqrt() / 32.0;
        [
            (1.0 + s10 + r) * k,
            (5.0 + s10 + 3.0 * r) * k,
            (10.0 - 2.0 * s10 + 2.0 * r) * k,
            (10.0 - 2.0 * s10 - 2.0 * r) * k,
            (5.0 + s10 - 3.0 * r) * k,
            (1.0 + s10 - r) * k,
        ]
    }

    #[test]
    fn coefficients_match_closed_form() {
        let h = closed_form_db3();
        for j in 0..6 {
            assert!((DB3_DEC_LO[5 - j] - h[j]).abs() < 1e-14);
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            assert!((DB3_DEC_HI[j] - sign * h[j]).abs() < 1e-14);
        }
        let sum: f64 = DB3_DEC_LO.iter().sum();
        assert!((sum - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn constants_are_annihilated() {
        for mode in [BoundaryMode::Symmetric, BoundaryMode::Periodized] {
            let s = ScalarSignal::new(vec![7.0; 3600], 60.0).unwrap();
            let dec = dwt_db3(&s, 9, mode).unwrap();
            for d in &dec.details {
                assert!(d.iter().all(|c| c.abs() <= 1e-9));
            }
        }
    }

    #[test]
    fn symmetric_lengths() {
        let s = ScalarSignal::new(vec![1.0; 3600], 60.0).unwrap();
        let dec = dwt_db3(&s, 9, BoundaryMode::Symmetric).unwrap();
        let lens: Vec<usize> = dec.details.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![1802, 903, 454, 229, 117, 61, 33, 19, 12]);
    }

    #[test]
    fn perfect_reconstruction_any_length() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [6usize, 7, 31, 360, 361, 1000, 3600] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            for mode in [BoundaryMode::Symmetric, BoundaryMode::Periodized] {
                let s = ScalarSignal::new(x.clone(), 60.0).unwrap();
                let mut level = 1;
                while dwt_db3(&s, level + 1, mode).is_ok() && level < 9 {
                    level += 1;
                }
                let dec = dwt_db3(&s, level, mode).unwrap();
                let y = idwt_db3(&dec);
                assert_eq!(y.len(), n);
                let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(err / norm < 1e-10, "n {n} mode {mode:?}: {}", err / norm);
            }
        }
    }

    #[test]
    fn minimum_window_reaches_level_nine() {
        let s = ScalarSignal::new(vec![0.5; 360], 60.0).unwrap();
        assert_eq!(dwt_db3(&s, 9, BoundaryMode::Symmetric).unwrap().levels(), 9);
    }

    #[test]
    fn too_deep() {
        let s = ScalarSignal::new(vec![1.0; 5], 60.0).unwrap();
        assert!(matches!(
            dwt_db3(&s, 1, BoundaryMode::Symmetric),
            Err(Error::DecompositionTooDeep { level: 1, len: 5 })
        ));
        let s = ScalarSignal::new(vec![1.0; 64], 60.0).unwrap();
        assert!(matches!(
            dwt_db3(&s, 5, BoundaryMode::Periodized),
            Err(Error::DecompositionTooDeep { level: 5, len: 4 })
        ));
    }
}
