//! Annotation backend: label cycling, pre-annotation, multi-annotator
//! agreement and consensus export, box storage, paging, and the HTTP service.

mod consensus;
mod service;
mod store;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{threshold_label, BinaryLabel};

pub use consensus::{
    agreement, export_consensus, ConflictAction, ConsensusExport, ConsensusPolicy, ConsensusRule, Exclusion,
    ExclusionReason, Insufficient,
};
pub use service::{router, ServiceState};
pub use store::{replay, AnnotationStore, LogEntry, LogPayload, TileView};

/// Annotator id carried by every machine-proposed record.
pub const PREANNOTATION_ANNOTATOR: &str = "__preannotation__";
pub const DEFAULT_PAGE_SIZE: usize = 16;
pub const DEFAULT_PREANNOTATION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("no human records for tile {0}")]
    NoHumanRecords(String),
    #[error("box {index} lies outside the {width}x{height} tile")]
    OutOfBoundsBox { index: usize, width: u32, height: u32 },
    #[error("page {index} out of range ({count} pages)")]
    PageOutOfRange { index: usize, count: usize },
    #[error("invalid page size {0}")]
    InvalidPageSize(usize),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("tile {tile_id:?} not in dataset {dataset:?}")]
    UnknownTile { dataset: String, tile_id: String },
    #[error("annotator id {0:?} is reserved or empty")]
    InvalidAnnotator(String),
    #[error("dataset {dataset:?} is not assigned to {annotator:?}")]
    NotAssigned { dataset: String, annotator: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
    Unknown,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Positive, Label::Negative, Label::Unknown];

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive" => Some(Label::Positive),
            "negative" => Some(Label::Negative),
            "unknown" => Some(Label::Unknown),
            _ => None,
        }
    }
}

impl From<BinaryLabel> for Label {
    fn from(l: BinaryLabel) -> Self {
        match l {
            BinaryLabel::Positive => Label::Positive,
            BinaryLabel::Negative => Label::Negative,
        }
    }
}

/// positive → negative → unknown → positive
pub fn cycle_label(current: Label) -> Label {
    match current {
        Label::Positive => Label::Negative,
        Label::Negative => Label::Unknown,
        Label::Unknown => Label::Positive,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Preannotation,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub tile_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub origin: Origin,
    pub timestamp_ms: u64,
}

/// Score ≥ threshold gives positive, anything else negative. Output follows
/// the order of `tile_ids`; tiles without a prediction are skipped.
pub fn preannotate(
    tile_ids: &[&str],
    predictions: &HashMap<String, f64>,
    threshold: f64,
    timestamp_ms: u64,
) -> Result<Vec<LabelRecord>, AnnotationError> {
    let mut out = Vec::new();
    for id in tile_ids {
        let Some(&score) = predictions.get(*id) else {
            continue;
        };
        let label = threshold_label(score, threshold).map_err(|_| AnnotationError::ScoreOutOfRange(score))?;
        out.push(LabelRecord {
            tile_id: id.to_string(),
            annotator_id: PREANNOTATION_ANNOTATOR.to_string(),
            label: label.into(),
            origin: Origin::Preannotation,
            timestamp_ms,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxConvention {
    TopLeft,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub tile_id: String,
    pub annotator_id: String,
    /// Convention of the submitted boxes; stored boxes are always top-left.
    pub convention: BoxConvention,
    pub boxes: Vec<PixelBox>,
}

/// Converts to top-left and checks every box lies inside the tile.
/// An empty list is a valid (negative) annotation.
pub fn store_boxes(
    tile_id: &str,
    annotator_id: &str,
    boxes: &[PixelBox],
    convention: BoxConvention,
    tile_size: (u32, u32),
) -> Result<BoxAnnotation, AnnotationError> {
    let (width, height) = tile_size;
    let mut out = Vec::with_capacity(boxes.len());
    for (index, b) in boxes.iter().enumerate() {
        let (x, y) = match convention {
            BoxConvention::TopLeft => (b.x, b.y),
            BoxConvention::Center => (b.x - b.w / 2.0, b.y - b.h / 2.0),
        };
        let ok = [x, y, b.w, b.h].iter().all(|v| v.is_finite())
            && b.w > 0.0
            && b.h > 0.0
            && x >= 0.0
            && y >= 0.0
            && x + b.w <= f64::from(width)
            && y + b.h <= f64::from(height);
        if !ok {
            return Err(AnnotationError::OutOfBoundsBox { index, width, height });
        }
        out.push(PixelBox { x, y, w: b.w, h: b.h });
    }
    Ok(BoxAnnotation {
        tile_id: tile_id.to_string(),
        annotator_id: annotator_id.to_string(),
        convention,
        boxes: out,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationPage {
    pub dataset: String,
    pub page_index: usize,
    pub page_size: usize,
    pub page_count: usize,
    pub tile_ids: Vec<String>,
}

/// Pages over the lexicographically sorted tile ids. An empty dataset has no
/// pages.
pub fn page(dataset: &str, tile_ids: &[&str], page_index: usize, page_size: usize) -> Result<AnnotationPage, AnnotationError> {
    if page_size == 0 {
        return Err(AnnotationError::InvalidPageSize(page_size));
    }
    let mut ids: Vec<&str> = tile_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let count = ids.len().div_ceil(page_size);
    if page_index >= count {
        return Err(AnnotationError::PageOutOfRange { index: page_index, count });
    }
    let start = page_index * page_size;
    let end = (start + page_size).min(ids.len());
    Ok(AnnotationPage {
        dataset: dataset.to_string(),
        page_index,
        page_size,
        page_count: count,
        tile_ids: ids[start..end].iter().map(|s| s.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_has_length_three() {
        assert_eq!(cycle_label(Label::Positive), Label::Negative);
        assert_eq!(cycle_label(Label::Unknown), Label::Positive);
        for l in Label::ALL {
            assert_eq!(cycle_label(cycle_label(cycle_label(l))), l);
            assert_ne!(cycle_label(l), l);
        }
    }

    #[test]
    fn preannotation_boundary_inclusive() {
        let preds: HashMap<String, f64> = [("a", 0.9), ("b", 0.5), ("c", 0.4999)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let r = preannotate(&["a", "b", "c", "d"], &preds, 0.5, 7).unwrap();
        let labels: Vec<Label> = r.iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![Label::Positive, Label::Positive, Label::Negative]);
        assert!(r.iter().all(|r| r.origin == Origin::Preannotation && r.annotator_id == PREANNOTATION_ANNOTATOR));

        let bad: HashMap<String, f64> = [("a".to_string(), 1.2)].into();
        assert!(matches!(preannotate(&["a"], &bad, 0.5, 0), Err(AnnotationError::ScoreOutOfRange(_))));
    }

    #[test]
    fn center_boxes_normalized() {
        let b = PixelBox { x: 165.0, y: 165.0, w: 100.0, h: 50.0 };
        let a = store_boxes("t", "u", &[b], BoxConvention::Center, (330, 330)).unwrap();
        assert_eq!(a.boxes[0], PixelBox { x: 115.0, y: 140.0, w: 100.0, h: 50.0 });
        assert_eq!(a.convention, BoxConvention::Center);

        let again = store_boxes("t", "u", &a.boxes, BoxConvention::TopLeft, (330, 330)).unwrap();
        assert_eq!(again.boxes, a.boxes);
    }

    #[test]
    fn out_of_bounds_at_each_edge() {
        let cases = [
            PixelBox { x: 10.0, y: 100.0, w: 30.0, h: 10.0 },
            PixelBox { x: 100.0, y: 4.0, w: 10.0, h: 10.0 },
            PixelBox { x: 320.0, y: 100.0, w: 30.0, h: 10.0 },
            PixelBox { x: 100.0, y: 326.0, w: 10.0, h: 10.0 },
        ];
        let fine = PixelBox { x: 165.0, y: 165.0, w: 10.0, h: 10.0 };
        for c in cases {
            let r = store_boxes("t", "u", &[fine, c], BoxConvention::Center, (330, 330));
            assert!(matches!(r, Err(AnnotationError::OutOfBoundsBox { index: 1, .. })), "{c:?}");
        }
        assert!(store_boxes("t", "u", &[], BoxConvention::Center, (330, 330)).unwrap().boxes.is_empty());
    }

    #[test]
    fn paging_partition() {
        let ids: Vec<String> = (0..33).map(|i| format!("t{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        assert_eq!(page("d", &refs, 0, 16).unwrap().tile_ids.len(), 16);
        assert_eq!(page("d", &refs, 2, 16).unwrap().tile_ids, vec!["t32"]);
        assert!(matches!(page("d", &refs, 3, 16), Err(AnnotationError::PageOutOfRange { index: 3, count: 3 })));
        let mut rev = refs.clone();
        rev.reverse();
        assert_eq!(page("d", &rev, 1, 16).unwrap(), page("d", &refs, 1, 16).unwrap());
    }
}
