use serde::{Deserialize, Serialize};

use crate::labels::ModelKind;

pub const LAYOUT_VERSION: &str = "rawband-odd-levels/1";
pub const N_FEATURES: usize = 132;
pub const STATS_PER_BAND: usize = 9;
pub const REST_THRESHOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Acc,
    Gyr,
}

impl Sensor {
    pub const ALL: [Sensor; 2] = [Sensor::Acc, Sensor::Gyr];
}

/// Signal a block of statistics is computed on: the undecomposed norm
/// signal or one wavelet detail level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Raw,
    Level(u8),
}

impl Band {
    pub const ALL: [Band; 6] = [
        Band::Raw,
        Band::Level(1),
        Band::Level(3),
        Band::Level(5),
        Band::Level(7),
        Band::Level(9),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Std,
    Norm,
    Max,
    Rms,
    Kurtosis,
    Skewness,
    DStd,
    DNorm,
    DRms,
}

impl Stat {
    pub const ALL: [Stat; STATS_PER_BAND] = [
        Stat::Std,
        Stat::Norm,
        Stat::Max,
        Stat::Rms,
        Stat::Kurtosis,
        Stat::Skewness,
        Stat::DStd,
        Stat::DNorm,
        Stat::DRms,
    ];

    pub fn is_differentiated(self) -> bool {
        matches!(self, Stat::DStd | Stat::DNorm | Stat::DRms)
    }

    pub fn is_non_negative(self) -> bool {
        !matches!(self, Stat::Kurtosis | Stat::Skewness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    OneMinute,
    FiveMinutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralStat {
    PeakPower,
    MeanPowerAtPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "snake_case")]
pub enum FeatureKey {
    Band { sensor: Sensor, band: Band, stat: Stat },
    Rest { sensor: Sensor, threshold: u8, horizon: Horizon },
    Spectral { sensor: Sensor, stat: SpectralStat },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub index: usize,
    #[serde(flatten)]
    pub key: FeatureKey,
}

/// Canonical index map of the feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub version: String,
    pub entries: Vec<LayoutEntry>,
}

impl FeatureLayout {
    pub fn canonical() -> Self {
        let mut keys = Vec::with_capacity(N_FEATURES);
        for sensor in Sensor::ALL {
            for band in Band::ALL {
                for stat in Stat::ALL {
                    keys.push(FeatureKey::Band { sensor, band, stat });
                }
            }
        }
        for sensor in Sensor::ALL {
            for threshold in 0..REST_THRESHOLDS as u8 {
                for horizon in [Horizon::OneMinute, Horizon::FiveMinutes] {
                    keys.push(FeatureKey::Rest { sensor, threshold, horizon });
                }
            }
        }
        for sensor in Sensor::ALL {
            for stat in [SpectralStat::PeakPower, SpectralStat::MeanPowerAtPeak] {
                keys.push(FeatureKey::Spectral { sensor, stat });
            }
        }
        FeatureLayout {
            version: LAYOUT_VERSION.to_string(),
            entries: keys
                .into_iter()
                .enumerate()
                .map(|(index, key)| LayoutEntry { index, key })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn key(&self, index: usize) -> Option<FeatureKey> {
        self.entries.get(index).map(|e| e.key)
    }

    pub fn index_of(&self, key: FeatureKey) -> Option<usize> {
        self.entries.iter().position(|e| e.key == key)
    }
}

pub(crate) fn band_index(sensor: Sensor, band_pos: usize, stat_pos: usize) -> usize {
    let s = match sensor {
        Sensor::Acc => 0,
        Sensor::Gyr => 1,
    };
    (s * Band::ALL.len() + band_pos) * STATS_PER_BAND + stat_pos
}

pub(crate) const REST_BASE: usize = 2 * 6 * STATS_PER_BAND;
pub(crate) const SPECTRAL_BASE: usize = REST_BASE + 2 * REST_THRESHOLDS * 2;

/// Wavelet levels each model ignores.
pub fn dropped_levels(kind: ModelKind) -> &'static [u8] {
    match kind {
        ModelKind::Tremor => &[],
        ModelKind::Dyskinesia => &[1, 9],
        ModelKind::Bradykinesia => &[1, 7],
    }
}

/// Indices of the full vector that `kind` consumes, in ascending order.
pub fn retained_indices(kind: ModelKind) -> Vec<usize> {
    let layout = FeatureLayout::canonical();
    let dropped = dropped_levels(kind);
    layout
        .entries
        .iter()
        .filter(|e| match e.key {
            FeatureKey::Band {
                band: Band::Level(l), ..
            } => !dropped.contains(&l),
            _ => true,
        })
        .map(|e| e.index)
        .collect()
}

pub fn input_dim(kind: ModelKind) -> usize {
    N_FEATURES - dropped_levels(kind).len() * 2 * STATS_PER_BAND
}
