//! Run configuration: one JSON document per command invocation.
//!
//! Every section has defaults, so `{}` is a valid configuration. Unknown keys
//! are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::background::{BackgroundOptions, BackgroundSource};
use crate::detect::DetectOptions;
use crate::error::{Error, Result};
use crate::gee::GeeOptions;
use crate::sim::{default_latin_square, SimConfig, SpikeInDesign, TagSimConfig};
use crate::tagscreen::TagScreenOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    #[default]
    LatinSquare,
    Tags,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub kind: SimKind,
    /// Subset of Latin-square mixtures to generate, in order; all when absent.
    pub mixtures: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub sim: SimConfig,
    pub tags: TagSimConfig,
}

impl SimulateConfig {
    pub fn design(&self) -> Result<SpikeInDesign> {
        let mut design = default_latin_square();
        if let Some(m) = &self.mixtures {
            design = design.restrict_mixtures(m)?;
        }
        if let Some(r) = self.replicates {
            design = SpikeInDesign::new(design.levels, design.assignment, r)?;
        }
        Ok(design)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffexpConfig {
    pub gee: GeeOptions,
    /// Conditions compared as `(reference, treatment)`; the dataset must
    /// contain exactly two conditions when absent.
    pub conditions: Option<[u32; 2]>,
    pub source: BackgroundSource,
    /// Fit without the nonspecific component.
    pub no_background: bool,
    /// Estimate the per-condition signal offsets from a first pass.
    pub estimate_nu: bool,
}

impl Default for DiffexpConfig {
    fn default() -> Self {
        DiffexpConfig {
            gee: GeeOptions::default(),
            conditions: None,
            source: BackgroundSource::Mismatch,
            no_background: false,
            estimate_nu: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub background: BackgroundOptions,
    pub detect: DetectOptions,
    pub diffexp: DiffexpConfig,
    pub tagscreen: TagScreenOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::io::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.background.validate()?;
        self.detect.validate()?;
        self.diffexp.gee.validate()?;
        if let Some([a, b]) = self.diffexp.conditions {
            if a == b {
                return Err(Error::Config(format!("diffexp.conditions must differ, got [{a}, {b}]")));
            }
        }
        if !(self.tagscreen.floor > 0.0) || !self.tagscreen.llr_threshold.is_finite() {
            return Err(Error::Config(
                "tagscreen needs a positive floor and a finite threshold".into(),
            ));
        }
        if self.simulate.replicates == Some(0) {
            return Err(Error::Config("simulate.replicates must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON with every default filled in.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.detect.tau, 0.015);
        assert_eq!((c.detect.present_below, c.detect.absent_above), (0.4, 0.6));
        assert_eq!(c.background.df, 5);
        assert_eq!(c.diffexp.gee.level, 0.01);
        assert_eq!(c.simulate.design().unwrap().n_arrays(), 42);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        for bad in [
            r#"{"sed": 1}"#,
            r#"{"detect": {"tua": 0.1}}"#,
            r#"{"simulate": {"sim": {"noise": {"sigma": 1}}}}"#,
            r#"{"detect": {"present_below": 0.7, "absent_above": 0.6}}"#,
            r#"{"diffexp": {"gee": {"level": 1.5}}}"#,
            r#"{"diffexp": {"conditions": [2, 2]}}"#,
            r#"{"tagscreen": {"floor": 0}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn canonical_json_reloads() {
        let c = RunConfig::from_json(r#"{"seed": 9, "simulate": {"kind": "tags", "mixtures": [0, 1]}}"#).unwrap();
        assert_eq!(RunConfig::from_json(&c.canonical_json()).unwrap(), c);
        assert_eq!(c.simulate.design().unwrap().n_arrays(), 6);
    }
}
