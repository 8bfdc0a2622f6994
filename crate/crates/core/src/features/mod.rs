//! The per-window feature vector: wavelet-band statistics, rest fractions
//! and spectral-peak features of the smoothed sensor norms.

mod extract;
mod layout;
mod stats;
pub mod store;

pub use extract::{
    build_feature_vector, build_feature_vectors, minute_norms, psd_peak, reduce_features, reduce_slice, spectral_peak_features,
    FeatureConfig, FeatureVector,
};
pub use layout::{
    dropped_levels, input_dim, retained_indices, Band, FeatureKey, FeatureLayout, Horizon, LayoutEntry, Sensor,
    SpectralStat, Stat, LAYOUT_VERSION, N_FEATURES, REST_THRESHOLDS, STATS_PER_BAND,
};
pub use stats::{band_statistics, diff_statistics, log_scale, rest_fraction, BandStats, DiffStats, LOG_EPSILON};
