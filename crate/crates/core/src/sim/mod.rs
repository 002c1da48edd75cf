//! Synthetic probe-level data with known parameters.
//!
//! Intensities follow the additive model `O + exp(mu + xi) + exp(nu + phi +
//! theta + eps)` with sequence-driven `mu` and `phi`, exchangeable
//! cross-array noise, and spike-in designs that fix `theta`.

mod design;
mod generate;
mod tags;

pub use design::{default_latin_square, SpikeInDesign};
pub use generate::{
    default_nonspecific_affinity, default_probe_effect, generate, generate_from_params, mismatch_of, random_sequence,
    GroundTruth, SimConfig, Skeleton, MISMATCH_POSITION,
};
pub use tags::{generate_tags, TagKind, TagSimConfig, TagTruth};
