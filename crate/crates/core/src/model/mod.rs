//! Domain types of the probe-level model and its moment calculus.

pub mod dataset;
pub mod moments;
pub mod params;

pub use dataset::{ArrayMeta, Probe, ProbeLevelDataset, ProbeSet, GREEN, MM, PM, RED};
pub use moments::{
    contrast_variance, cross_array_covariance, expected_intensity, intensity_covariance, same_array_variance,
    variance_profile, MomentPair,
};
pub use params::{ModelParams, NoiseParams};
