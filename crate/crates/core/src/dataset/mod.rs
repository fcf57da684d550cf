//! Labeled tile datasets built from registers and coverage areas.
//!
//! Sampling and splitting are pure functions of their inputs and a 64-bit
//! seed; the same call always yields the same manifest.

mod manifest;
mod register;
mod sampling;
mod split;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster_geo::{GeoError, TileSpec, WorldBBox};

pub use manifest::{read_manifest, write_manifest, MANIFEST_HEADER};
pub use register::{read_register, write_register, RegisterPoint};
pub use sampling::{sample_negatives, sample_positives, Jitter, PositiveSample, DEFAULT_EXCLUSION_RADIUS};
pub use split::{stratified_split, SplitFractions};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("rejection sampling exhausted after {attempts} attempts: found {found} of {requested} negatives")]
    ExhaustedSampling {
        found: usize,
        requested: usize,
        attempts: usize,
    },
    #[error("record {tile_id} is not labeled positive or negative")]
    UnlabeledRecord { tile_id: String },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("register: {0}")]
    Register(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileLabel {
    Positive,
    Negative,
    Unknown,
    Unlabeled,
}

impl TileLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TileLabel::Positive => "positive",
            TileLabel::Negative => "negative",
            TileLabel::Unknown => "unknown",
            TileLabel::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive" => Some(TileLabel::Positive),
            "negative" => Some(TileLabel::Negative),
            "unknown" => Some(TileLabel::Unknown),
            "unlabeled" => Some(TileLabel::Unlabeled),
            _ => None,
        }
    }

    /// Positive/negative labels are usable for training and evaluation.
    pub fn is_binary(&self) -> bool {
        matches!(self, TileLabel::Positive | TileLabel::Negative)
    }
}

impl fmt::Display for TileLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Validation,
    None,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Validation => "validation",
            Split::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            "validation" => Some(Split::Validation),
            "none" => Some(Split::None),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub tile_id: String,
    /// Image path relative to the manifest's directory.
    pub image_ref: String,
    /// World top-left corner of the tile.
    pub anchor: (f64, f64),
    pub label: TileLabel,
    pub split: Split,
}

impl TileRecord {
    pub fn new(tile_id: impl Into<String>, anchor: (f64, f64), label: TileLabel) -> Self {
        let tile_id = tile_id.into();
        TileRecord {
            image_ref: format!("tiles/{tile_id}.png"),
            tile_id,
            anchor,
            label,
            split: Split::None,
        }
    }

    pub fn footprint(&self, spec: &TileSpec) -> WorldBBox {
        spec.footprint_at(self.anchor.0, self.anchor.1)
    }
}

/// The dataset's ledger: tile geometry, CRS and every tile record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub spec: TileSpec,
    pub crs_id: String,
    pub records: Vec<TileRecord>,
    pub seed: u64,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, spec: TileSpec, crs_id: impl Into<String>, seed: u64) -> Self {
        DatasetManifest {
            name: name.into(),
            spec,
            crs_id: crs_id.into(),
            records: Vec::new(),
            seed,
        }
    }

    /// Tile ids must be unique.
    pub fn validate(&self) -> Result<(), DatasetError> {
        self.spec.validate()?;
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !seen.insert(r.tile_id.as_str()) {
                return Err(DatasetError::InvalidManifest(format!(
                    "duplicate tile_id {}",
                    r.tile_id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, tile_id: &str) -> Option<&TileRecord> {
        self.records.iter().find(|r| r.tile_id == tile_id)
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &TileRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Records fit for a training or test export: binary labels only.
    pub fn exportable(&self) -> impl Iterator<Item = &TileRecord> {
        self.records.iter().filter(|r| r.label.is_binary())
    }

    pub fn assign_split(&mut self, split: Split) {
        for r in &mut self.records {
            r.split = split;
        }
    }
}

/// Translates every coordinate of `bbox` by `(dx, dy)`.
pub fn shift_region(bbox: &WorldBBox, dx: f64, dy: f64) -> WorldBBox {
    bbox.translate(dx, dy)
}
