//! Seeded synthetic cohort with class- and severity-dependent spectral
//! signatures.

use std::collections::HashSet;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnnotationSequence, ImuRecording, ImuSample, ACC_RANGE_G, GYR_RANGE_DPS};
use crate::labels::{check_label, Activity, Annotation, PdClass};

pub const RATE_HZ: f64 = 60.0;
pub const MINUTE_SAMPLES: usize = 3600;
/// Upper bound of the resting share of a minute outside walking.
const MAX_NATURAL_PAUSE: f64 = 0.3;
/// Smallest share of the tremor axis along gravity.
const MIN_TREMOR_VERTICAL: f64 = 0.6;

/// Relative 1-4 Hz accelerometer power of each class and severity, balanced = 1.
pub const PSD_BALANCED: f64 = 6.461;
pub const PSD_BK: [f64; 4] = [4.266, 3.959, 3.073, 0.063];
pub const PSD_DK: [f64; 4] = [11.463, 21.793, 23.005, 28.138];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Signature {
    /// 1-4 Hz power of bradykinesia relative to the unaffected motion.
    pub bk_power: [f64; 4],
    /// Fraction of each minute spent at rest under bradykinesia.
    pub bk_rest: [f64; 4],
    /// 1-4 Hz power of dyskinesia relative to balanced sitting.
    pub dk_power: [f64; 4],
    /// Tremor tone amplitude in G.
    pub tremor_amp_g: [f64; 4],
}

impl Default for Signature {
    fn default() -> Self {
        Signature {
            bk_power: PSD_BK.map(|v| v / PSD_BALANCED),
            bk_rest: [0.15, 0.3, 0.5, 0.85],
            dk_power: PSD_DK.map(|v| v / PSD_BALANCED),
            tremor_amp_g: [0.12, 0.2, 0.3, 0.45],
        }
    }
}

impl Signature {
    /// Stronger contrasts between classes, for end-to-end checks.
    pub fn separable() -> Self {
        Signature {
            bk_power: [0.12, 0.06, 0.03, 0.01],
            bk_rest: [0.45, 0.6, 0.72, 0.85],
            dk_power: [6.0, 10.0, 15.0, 22.0],
            tremor_amp_g: [0.15, 0.25, 0.38, 0.55],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.bk_power.iter().all(|v| *v > 0.0 && *v < 1.0)
            && self.bk_rest.iter().all(|v| (0.0..1.0).contains(v))
            && self.dk_power.iter().all(|v| *v > 1.0)
            && self.tremor_amp_g.iter().all(|v| *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthetic signature {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassMix {
    pub balanced: f64,
    pub tremor: f64,
    pub bradykinesia: f64,
    pub dyskinesia: f64,
    /// Distribution of severities 1-4 within each non-balanced class.
    pub severity: [f64; 4],
}

impl Default for ClassMix {
    fn default() -> Self {
        ClassMix {
            balanced: 0.3595,
            tremor: 0.0422,
            bradykinesia: 0.3870,
            dyskinesia: 0.2113,
            severity: [0.25; 4],
        }
    }
}

impl ClassMix {
    pub fn separable() -> Self {
        ClassMix {
            balanced: 0.30,
            tremor: 0.20,
            bradykinesia: 0.25,
            dyskinesia: 0.25,
            severity: [0.25; 4],
        }
    }

    fn classes(&self) -> [(PdClass, f64); 4] {
        [
            (PdClass::Balanced, self.balanced),
            (PdClass::Tremor, self.tremor),
            (PdClass::Bradykinesia, self.bradykinesia),
            (PdClass::Dyskinesia, self.dyskinesia),
        ]
    }

    /// Probability of one `(class, severity)` label.
    pub fn probability(&self, class: PdClass, severity: u8) -> f64 {
        let p = self.classes().iter().find(|(c, _)| *c == class).map_or(0.0, |(_, p)| *p);
        match (class, severity) {
            (PdClass::Balanced, 0) => p,
            (PdClass::Balanced, _) | (_, 0) => 0.0,
            (_, s) if s <= 4 => p * self.severity[s as usize - 1],
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        check_distribution("class_mix", &self.classes().map(|(_, p)| p))?;
        check_distribution("class_mix.severity", &self.severity)
    }

    fn draw(&self, rng: &mut impl Rng) -> (PdClass, u8) {
        let class = pick(&self.classes(), rng);
        if class == PdClass::Balanced {
            return (class, 0);
        }
        let sev = pick(&[(1u8, self.severity[0]), (2, self.severity[1]), (3, self.severity[2]), (4, self.severity[3])], rng);
        (class, sev)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityMix {
    pub other: f64,
    pub sitting: f64,
    pub walking: f64,
    pub standing: f64,
    pub lying: f64,
}

impl Default for ActivityMix {
    fn default() -> Self {
        ActivityMix {
            other: 1.0 - 0.4158 - 0.12 - 0.15 - 0.12,
            sitting: 0.4158,
            walking: 0.12,
            standing: 0.15,
            lying: 0.12,
        }
    }
}

impl ActivityMix {
    fn entries(&self) -> [(Activity, f64); 5] {
        [
            (Activity::Other, self.other),
            (Activity::Sitting, self.sitting),
            (Activity::Walking, self.walking),
            (Activity::Standing, self.standing),
            (Activity::Lying, self.lying),
        ]
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{name} must be a probability vector, got {p:?}")));
    }
    Ok(())
}

fn pick<T: Copy>(items: &[(T, f64)], rng: &mut impl Rng) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (item, p) in items {
        acc += p;
        if u < acc {
            return *item;
        }
    }
    items.iter().rev().find(|(_, p)| *p > 0.0).map(|(i, _)| *i).unwrap_or(items[0].0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub minutes: u32,
    pub class_mix: ClassMix,
    pub activity_mix: ActivityMix,
    pub seed: u64,
    /// Minutes sharing one drawn label.
    #[serde(default = "default_episode")]
    pub episode_minutes: u32,
    #[serde(default)]
    pub signature: Signature,
    /// Probability of dropping each sample.
    #[serde(default)]
    pub drop_rate: f64,
}

fn default_episode() -> u32 {
    3
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        if self.minutes < 5 {
            return Err(Error::Config(format!("{}: need at least 5 minutes", self.subject_id)));
        }
        if self.episode_minutes == 0 {
            return Err(Error::Config("episode_minutes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::Config("drop_rate must lie in [0, 1)".into()));
        }
        if self.subject_id.is_empty() || self.subject_id.contains(['.', '/', '\\']) {
            return Err(Error::Config(format!("invalid subject id {:?}", self.subject_id)));
        }
        self.class_mix.validate()?;
        check_distribution("activity_mix", &self.activity_mix.entries().map(|(_, p)| p))?;
        self.signature.validate()
    }
}

/// Cohort description used by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub subjects: usize,
    pub minutes: u32,
    pub seed: u64,
    pub episode_minutes: u32,
    pub class_mix: ClassMix,
    pub activity_mix: ActivityMix,
    pub signature: Signature,
    pub drop_rate: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            subjects: 10,
            minutes: 120,
            seed: 1,
            episode_minutes: default_episode(),
            class_mix: ClassMix::default(),
            activity_mix: ActivityMix::default(),
            signature: Signature::default(),
            drop_rate: 0.0,
        }
    }
}

impl CohortSpec {
    /// Well-separated signatures and a balanced class mix.
    pub fn separable(subjects: usize, minutes: u32, seed: u64) -> Self {
        CohortSpec {
            subjects,
            minutes,
            seed,
            class_mix: ClassMix::separable(),
            signature: Signature::separable(),
            ..Default::default()
        }
    }

    pub fn profiles(&self) -> Vec<SubjectProfile> {
        (0..self.subjects)
            .map(|i| SubjectProfile {
                subject_id: format!("S{:02}", i + 1),
                minutes: self.minutes,
                class_mix: self.class_mix.clone(),
                activity_mix: self.activity_mix.clone(),
                seed: mix_seed(self.seed, i as u64),
                episode_minutes: self.episode_minutes,
                signature: self.signature.clone(),
                drop_rate: self.drop_rate,
            })
            .collect()
    }
}

/// SplitMix64 finalizer over a pair.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reusable minute generator; holds the inverse FFT plan.
pub struct Synthesizer {
    ifft: Arc<dyn Fft<f64>>,
}

impl Default for Synthesizer {
    fn default() -> Self {
        Self::new()
    }
}

type Axes = [Vec<f64>; 3];

impl Synthesizer {
    pub fn new() -> Self {
        Synthesizer {
            ifft: FftPlanner::new().plan_fft_inverse(MINUTE_SAMPLES),
        }
    }

    /// Zero-mean noise with flat spectrum on `[lo, hi]` Hz and standard
    /// deviation exactly `sigma`.
    fn band_noise(&self, lo: f64, hi: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = MINUTE_SAMPLES;
        let df = RATE_HZ / n as f64;
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for k in 1..n / 2 {
            let f = k as f64 * df;
            if f >= lo && f <= hi {
                let c = Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
                spec[k] = c;
                spec[n - k] = c.conj();
            }
        }
        self.ifft.process(&mut spec);
        let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
        let sd = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if sd == 0.0 {
            return x;
        }
        x.into_iter().map(|v| v * sigma / sd).collect()
    }

    fn band_axes(&self, lo: f64, hi: f64, sigma: f64, rng: &mut ChaCha8Rng) -> Axes {
        std::array::from_fn(|_| self.band_noise(lo, hi, sigma, rng))
    }

    fn base_motion(&self, activity: Activity, rng: &mut ChaCha8Rng) -> Axes {
        let z: f64 = StandardNormal.sample(rng);
        let jitter = (0.1 * z).exp();
        let sd = base_sd(activity);
        let mut m = match activity {
            Activity::Sitting => add(self.band_axes(1.0, 10.0, sd, rng), self.band_axes(0.3, 1.0, 0.03, rng)),
            Activity::Standing => add(self.band_axes(1.0, 10.0, sd, rng), self.band_axes(0.1, 0.5, 0.02, rng)),
            Activity::Lying => self.band_axes(0.5, 5.0, sd, rng),
            Activity::Other => self.band_axes(0.5, 8.0, sd, rng),
            Activity::Walking => {
                let fw = rng.random_range(2.3..2.7);
                let weights = [1.0, 0.6, 0.8];
                let mut m = self.band_axes(1.0, 10.0, sd, rng);
                for (h, amp) in [0.25, 0.12, 0.06].into_iter().enumerate() {
                    for (axis, w) in weights.iter().enumerate() {
                        let ph = rng.random_range(0.0..std::f64::consts::TAU);
                        for (i, v) in m[axis].iter_mut().enumerate() {
                            let t = i as f64 / RATE_HZ;
                            *v += w * amp * (std::f64::consts::TAU * fw * (h + 1) as f64 * t + ph).sin();
                        }
                    }
                }
                m
            }
        };
        m.iter_mut().flatten().for_each(|v| *v *= jitter);
        m
    }

    /// Dynamic acceleration (G) of one minute: activity motion plus the
    /// class overlay.
    pub fn motion(&self, class: PdClass, severity: u8, activity: Activity, seed: u64, sig: &Signature) -> Result<Axes> {
        check_label(class, severity)?;
        let mut base_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
        let mut m = self.base_motion(activity, &mut base_rng);
        // everyday pauses
        let pause = if activity == Activity::Walking { 0.0 } else { base_rng.random_range(0.0..MAX_NATURAL_PAUSE) };
        let natural = rest_envelope(pause, &mut base_rng);
        let s = severity as usize;
        // bradykinesia draws its own rest; dyskinetic patients never keep still
        if matches!(class, PdClass::Balanced | PdClass::Tremor) {
            apply_envelope(&mut m, &natural);
        }
        match class {
            PdClass::Balanced => {}
            PdClass::Bradykinesia => {
                let power = |a: &Axes| a.iter().flatten().map(|v| v * v).sum::<f64>();
                // rest intervals only outside walking; the gait itself shrinks
                let rest = if activity == Activity::Walking { 0.0 } else { sig.bk_rest[s - 1].max(pause) };
                let env = rest_envelope(rest, &mut rng);
                let before = power(&m);
                apply_envelope(&mut m, &env);
                let after = power(&m);
                let gain = if after > 0.0 { (sig.bk_power[s - 1] * before / after).sqrt() } else { 0.0 };
                m.iter_mut().flatten().for_each(|v| *v *= gain);
            }
            PdClass::Dyskinesia => {
                let restless = base_sd(Activity::Sitting).powi(2) - base_sd(activity).powi(2);
                if restless > 0.0 {
                    m = add(m, self.band_axes(1.0, 10.0, restless.sqrt(), &mut rng));
                }
                let sd = dk_sd(sig, s);
                m = add(m, self.band_axes(1.0, 4.0, sd, &mut rng));
            }
            PdClass::Tremor => {
                let f = if activity == Activity::Lying {
                    rng.random_range(6.5..7.5)
                } else {
                    rng.random_range(4.5..5.5)
                };
                let dir = loop {
                    let d = random_unit(&mut rng);
                    if d[2].abs() >= MIN_TREMOR_VERTICAL {
                        break d;
                    }
                };
                let amp = sig.tremor_amp_g[s - 1];
                let ph = rng.random_range(0.0..std::f64::consts::TAU);
                for (axis, d) in m.iter_mut().zip(dir) {
                    for (i, v) in axis.iter_mut().enumerate() {
                        let t = i as f64 / RATE_HZ;
                        *v += d * amp * (std::f64::consts::TAU * f * t + ph).sin();
                    }
                }
            }
        }
        Ok(m)
    }

    /// One minute of sensor data, timestamps starting at `t0`.
    pub fn minute(
        &self,
        class: PdClass,
        severity: u8,
        activity: Activity,
        seed: u64,
        sig: &Signature,
        t0: f64,
    ) -> Result<Vec<ImuSample>> {
        let m = self.motion(class, severity, activity, seed, sig)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
        let r = random_rotation(&mut rng);
        let acc_noise = Normal::new(0.0, 0.004).expect("valid sd");
        let gyr_noise = Normal::new(0.0, 0.15).expect("valid sd");
        let bias: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        const GYRO_GAIN: f64 = 4.0;
        let n = MINUTE_SAMPLES;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let world = [m[0][i], m[1][i], m[2][i] + 1.0];
            let (ip, im) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let dt = (im - ip) as f64 / RATE_HZ;
            let deriv = [0, 1, 2].map(|a| GYRO_GAIN * (m[a][im] - m[a][ip]) / dt);
            let acc = rotate(&r, world);
            let gyr = rotate(&r, deriv);
            let mut s = ImuSample {
                t: t0 + i as f64 / RATE_HZ,
                acc: std::array::from_fn(|a| acc[a] + acc_noise.sample(&mut rng)),
                gyr: std::array::from_fn(|a| gyr[a] + bias[a] + gyr_noise.sample(&mut rng)),
            };
            for a in 0..3 {
                s.acc[a] = s.acc[a].clamp(-ACC_RANGE_G, ACC_RANGE_G);
                s.gyr[a] = s.gyr[a].clamp(-GYR_RANGE_DPS, GYR_RANGE_DPS);
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn subject(&self, p: &SubjectProfile) -> Result<(ImuRecording, AnnotationSequence)> {
        p.validate()?;
        let mut label_rng = ChaCha8Rng::seed_from_u64(mix_seed(p.seed, u64::MAX));
        let mut drop_rng = ChaCha8Rng::seed_from_u64(mix_seed(p.seed, u64::MAX - 1));
        let mut samples = Vec::with_capacity(p.minutes as usize * MINUTE_SAMPLES);
        let mut annotations = Vec::with_capacity(p.minutes as usize);
        let mut current = None;
        for k in 0..p.minutes {
            if k % p.episode_minutes == 0 {
                let (class, sev) = p.class_mix.draw(&mut label_rng);
                let activity = pick(&p.activity_mix.entries(), &mut label_rng);
                current = Some((class, sev, activity));
            }
            let (class, sev, activity) = current.expect("set on first minute");
            let minute_seed = mix_seed(p.seed, k as u64);
            let mut m = self.minute(class, sev, activity, minute_seed, &p.signature, k as f64 * 60.0)?;
            if p.drop_rate > 0.0 {
                m.retain(|_| drop_rng.random::<f64>() >= p.drop_rate);
            }
            samples.extend(m);
            annotations.push(Annotation::new(k, class, sev, activity)?);
        }
        Ok((
            ImuRecording::new(p.subject_id.clone(), RATE_HZ, samples)?,
            AnnotationSequence::new(p.subject_id.clone(), annotations)?,
        ))
    }
}

/// Per-axis level of the 1-4 Hz dyskinetic acceleration at severity `s`.
fn dk_sd(sig: &Signature, s: usize) -> f64 {
    let band_power = base_sd(Activity::Sitting).powi(2) * 3.0 / 9.0;
    ((sig.dk_power[s - 1] - 1.0) * band_power).sqrt()
}

/// Broadband level of the activity's everyday motion, in G.
fn base_sd(activity: Activity) -> f64 {
    match activity {
        Activity::Sitting | Activity::Walking => 0.05,
        Activity::Standing => 0.06,
        Activity::Lying => 0.008,
        Activity::Other => 0.09,
    }
}

fn apply_envelope(m: &mut Axes, env: &[f64]) {
    for axis in m.iter_mut() {
        for (v, e) in axis.iter_mut().zip(env) {
            *v *= e;
        }
    }
}

fn add(mut a: Axes, b: Axes) -> Axes {
    for (x, y) in a.iter_mut().zip(b) {
        for (u, v) in x.iter_mut().zip(y) {
            *u += v;
        }
    }
    a
}

/// Per-sample gain: 1 while moving, near 0 during rest intervals. The
/// minute is split into four slots, each holding one rest interval of
/// `rest` of its length with half-second cosine ramps.
fn rest_envelope(rest: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    const SLOTS: usize = 4;
    const FLOOR: f64 = 0.02;
    let slot = MINUTE_SAMPLES / SLOTS;
    let ramp = (0.5 * RATE_HZ) as usize;
    let len = (rest * slot as f64).round() as usize;
    let mut env = vec![1.0; MINUTE_SAMPLES];
    if len == 0 {
        return env;
    }
    for s in 0..SLOTS {
        let start = s * slot + rng.random_range(0..=slot - len);
        for i in 0..len {
            let edge = i.min(len - 1 - i);
            let g = if edge < ramp {
                let w = 0.5 * (1.0 + (std::f64::consts::PI * edge as f64 / ramp as f64).cos());
                FLOOR + (1.0 - FLOOR) * w
            } else {
                FLOOR
            };
            env[start + i] = g;
        }
    }
    env
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            break q.map(|v| v / n);
        }
    };
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rotate(r: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

/// One minute of sensor data with a fresh synthesizer.
pub fn synth_minute(class: PdClass, severity: u8, activity: Activity, seed: u64) -> Result<Vec<ImuSample>> {
    Synthesizer::new().minute(class, severity, activity, seed, &Signature::default(), 0.0)
}

pub fn synth_cohort(profiles: &[SubjectProfile]) -> Result<Vec<(ImuRecording, AnnotationSequence)>> {
    if profiles.len() < 2 {
        return Err(Error::Config("a cohort needs at least 2 subjects".into()));
    }
    let mut seen = HashSet::new();
    for p in profiles {
        if !seen.insert(p.subject_id.as_str()) {
            return Err(Error::Config(format!("duplicate subject id {}", p.subject_id)));
        }
    }
    let synth = Synthesizer::new();
    profiles.iter().map(|p| synth.subject(p)).collect()
}
