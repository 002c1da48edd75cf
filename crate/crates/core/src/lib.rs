//! Probe-level statistical modeling of microarray intensities.
//!
//! Observed intensities are modeled as an additive optical floor plus
//! lognormal nonspecific and specific binding terms. The crate provides the
//! plug-in estimation pipeline for that model (optical floor, sequence
//! affinities, loess background curves, variance and correlation
//! components, normalization offsets), detection calls, GEE estimates of
//! differential expression with sandwich standard errors, mixture-model
//! screening of two-color deletion tags, and a simulator that draws data
//! from the model with known ground truth.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affinity;
pub mod background;
pub mod config;
pub mod detect;
pub mod error;
pub mod eval;
pub mod gee;
pub mod io;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod sim;
pub mod tagscreen;

pub use error::{Error, Result};
