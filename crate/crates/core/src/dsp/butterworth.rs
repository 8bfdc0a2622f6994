//! Zero-phase Butterworth band-pass filtering.
//!
//! The filter is designed as an analog Butterworth low-pass prototype,
//! transformed to a band-pass and mapped to the z-plane with the bilinear
//! transform (pre-warped cutoffs), then stored as second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScalarSignal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub lb_hz: f64,
    pub ub_hz: f64,
    pub order: usize,
}

impl BandpassSpec {
    pub const fn new(lb_hz: f64, ub_hz: f64, order: usize) -> Self {
        BandpassSpec { lb_hz, ub_hz, order }
    }

    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        let nyquist = rate_hz / 2.0;
        if self.order == 0 {
            return Err(Error::InvalidSpec("order must be positive".into()));
        }
        if !(self.lb_hz > 0.0 && self.lb_hz < self.ub_hz && self.ub_hz < nyquist) {
            return Err(Error::InvalidSpec(format!(
                "need 0 < lb ({}) < ub ({}) < nyquist ({nyquist})",
                self.lb_hz, self.ub_hz
            )));
        }
        Ok(())
    }

    /// Samples of odd reflection added on each side before filtering.
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }
}

/// `b0 + b1 z^-1 + b2 z^-2 / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (1.0 + z_inv * self.a[0] + z2 * self.a[1])
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub rate_hz: f64,
}

impl SosFilter {
    /// Complex frequency response at `f_hz`.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / self.rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Single causal pass in transposed direct form II, starting from the
    /// steady state for a constant input equal to `x[0]`.
    pub fn lfilter_steady(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let mut level = x0;
        for s in &self.sections {
            let g = s.dc_gain();
            let mut z2 = (s.b[2] - s.a[1] * g) * level;
            let mut z1 = (s.b[1] - s.a[0] * g) * level + z2;
            level *= g;
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * y + z2;
                z2 = s.b[2] * input - s.a[1] * y;
                *v = y;
            }
        }
    }
}

pub fn bandpass_design(spec: &BandpassSpec, rate_hz: f64) -> Result<SosFilter> {
    spec.validate(rate_hz)?;
    let n = spec.order;
    let fs2 = 2.0 * rate_hz;
    let w1 = fs2 * (PI * spec.lb_hz / rate_hz).tan();
    let w2 = fs2 * (PI * spec.ub_hz / rate_hz).tan();
    let bw = w2 - w1;
    let w0_sq = w1 * w2;

    let mut analog = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        analog.push(half + disc);
        analog.push(half - disc);
    }

    let mut gain = Complex64::new(bw.powi(n as i32) * fs2.powi(n as i32), 0.0);
    for p in &analog {
        gain /= fs2 - p;
    }
    let digital: Vec<Complex64> = analog.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();

    let mut sections = Vec::with_capacity(n);
    let mut reals = Vec::new();
    for p in &digital {
        if p.im.abs() <= 1e-12 * p.norm().max(1.0) {
            reals.push(p.re);
        } else if p.im > 0.0 {
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-2.0 * p.re, p.norm_sqr()],
            });
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    for pair in reals.chunks(2) {
        let (r1, r2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(r1 + r2), r1 * r2],
        });
    }
    debug_assert_eq!(sections.len(), n);
    let g = gain.re;
    for c in &mut sections[0].b {
        *c *= g;
    }
    Ok(SosFilter { sections, rate_hz })
}

fn forward_backward(filter: &SosFilter, x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let first = x[0];
    let last = x[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
    filter.lfilter_steady(&mut ext);
    ext.reverse();
    filter.lfilter_steady(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase filtering: the mean of the forward-backward and the
/// backward-forward passes, so the operator commutes exactly with time
/// reversal. Magnitude response is `|H|^2`.
pub fn filtfilt(filter: &SosFilter, x: &[f64], pad: usize) -> Result<Vec<f64>> {
    if x.len() <= pad.max(1) {
        return Err(Error::SignalTooShort {
            len: x.len(),
            min: pad.max(1),
        });
    }
    let fb = forward_backward(filter, x, pad);
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let mut bf = forward_backward(filter, &rev, pad);
    bf.reverse();
    Ok(fb.iter().zip(&bf).map(|(a, b)| 0.5 * (a + b)).collect())
}

pub fn butterworth_bandpass(sig: &ScalarSignal, spec: &BandpassSpec) -> Result<ScalarSignal> {
    let filter = bandpass_design(spec, sig.rate_hz)?;
    let values = filtfilt(&filter, &sig.values, spec.pad_len())?;
    Ok(ScalarSignal {
        values,
        rate_hz: sig.rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: BandpassSpec = BandpassSpec::new(0.1, 20.0, 4);

    /// Squared magnitude of the digital Butterworth band-pass evaluated from
    /// the analog prototype through the pre-warped frequency map; does not
    /// touch the pole/zero construction.
    fn prototype_mag_sq(spec: &BandpassSpec, rate: f64, f: f64) -> f64 {
        let warp = |f: f64| 2.0 * rate * (PI * f / rate).tan();
        let (w1, w2, w) = (warp(spec.lb_hz), warp(spec.ub_hz), warp(f));
        let x = (w * w - w1 * w2) / (w * (w2 - w1));
        1.0 / (1.0 + x.powi(2 * spec.order as i32))
    }

    fn tone(f: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / rate).sin()).collect()
    }

    #[test]
    fn design_matches_prototype_response() {
        for order in [1usize, 2, 3, 4, 5] {
            let spec = BandpassSpec::new(0.1, 20.0, order);
            let filt = bandpass_design(&spec, 60.0).unwrap();
            assert_eq!(filt.sections.len(), order);
            for f in [0.05, 0.1, 0.5, 2.0, 5.0, 10.0, 20.0, 25.0, 29.0] {
                let got = filt.response(f).norm_sqr();
                let want = prototype_mag_sq(&spec, 60.0, f);
                assert!((got - want).abs() < 1e-9 * want.max(1e-6), "order {order} f {f}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn passband_tone_preserved() {
        let x = tone(5.0, 60.0, 3600);
        let y = butterworth_bandpass(&ScalarSignal::new(x, 60.0).unwrap(), &SPEC).unwrap();
        let mid = &y.values[900..2700];
        let amp = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((amp - 1.0).abs() < 0.02, "amplitude {amp}");
    }

    #[test]
    fn dc_removed() {
        let y = butterworth_bandpass(&ScalarSignal::new(vec![3.0; 3600], 60.0).unwrap(), &SPEC).unwrap();
        assert!(y.values.iter().all(|v| v.abs() <= 1e-3));
    }

    #[test]
    fn stopband_attenuation_matches_design() {
        let x = tone(25.0, 60.0, 3600);
        let y = butterworth_bandpass(&ScalarSignal::new(x.clone(), 60.0).unwrap(), &SPEC).unwrap();
        // amplitude of the 25 Hz component, ignoring slow edge ringing
        let lock_in = |v: &[f64]| {
            let (mut c, mut s) = (0.0, 0.0);
            for (i, a) in v.iter().enumerate().take(2700).skip(900) {
                let ph = 2.0 * PI * 25.0 * i as f64 / 60.0;
                c += a * ph.cos();
                s += a * ph.sin();
            }
            (c * c + s * s).sqrt()
        };
        let ratio = lock_in(&y.values) / lock_in(&x);
        let designed = prototype_mag_sq(&SPEC, 60.0, 25.0);
        assert!(ratio <= 0.2);
        assert!((ratio - designed).abs() <= 0.1 * designed, "{ratio} vs {designed}");
    }

    #[test]
    fn invalid_specs() {
        let s = ScalarSignal::new(vec![0.0; 100], 60.0).unwrap();
        for spec in [
            BandpassSpec::new(0.0, 20.0, 4),
            BandpassSpec::new(5.0, 2.0, 4),
            BandpassSpec::new(0.1, 30.0, 4),
            BandpassSpec::new(0.1, 20.0, 0),
        ] {
            assert!(matches!(butterworth_bandpass(&s, &spec), Err(Error::InvalidSpec(_))));
        }
        let short = ScalarSignal::new(vec![0.0; 12], 60.0).unwrap();
        assert!(matches!(butterworth_bandpass(&short, &SPEC), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn time_reversal_symmetry_is_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..777).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = bandpass_design(&SPEC, 60.0).unwrap();
        let y = filtfilt(&f, &x, 12).unwrap();
        let xr: Vec<f64> = x.iter().rev().copied().collect();
        let mut yr = filtfilt(&f, &xr, 12).unwrap();
        yr.reverse();
        for (a, b) in y.iter().zip(&yr) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}
