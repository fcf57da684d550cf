use serde::{Deserialize, Serialize};

use super::{BinaryLabel, MetricsError};

pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.9;

/// Pixel box, `(x, y)` = top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxPx {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// A scored detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoxPx,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: BoxPx, confidence: f64) -> Self {
        Detection { bbox, confidence }
    }
}

/// An image is positive iff at least one detection has
/// `confidence ≥ threshold`.
pub fn detections_to_label(ds: &[Detection], threshold: f64) -> Result<BinaryLabel, MetricsError> {
    if let Some(d) = ds.iter().find(|d| !(0.0..=1.0).contains(&d.confidence)) {
        return Err(MetricsError::ConfidenceOutOfRange(d.confidence));
    }
    Ok(if ds.iter().any(|d| d.confidence >= threshold) {
        BinaryLabel::Positive
    } else {
        BinaryLabel::Negative
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dets(cs: &[f64]) -> Vec<Detection> {
        cs.iter()
            .map(|&c| Detection::new(BoxPx { x: 0.0, y: 0.0, w: 1.0, h: 1.0 }, c))
            .collect()
    }

    #[test]
    fn empty_is_negative() {
        assert_eq!(detections_to_label(&[], 0.9).unwrap(), BinaryLabel::Negative);
    }

    #[test]
    fn any_confident_detection() {
        assert_eq!(detections_to_label(&dets(&[0.95, 0.10]), 0.9).unwrap(), BinaryLabel::Positive);
    }

    #[test]
    fn threshold_boundary() {
        assert_eq!(detections_to_label(&dets(&[0.89]), 0.9).unwrap(), BinaryLabel::Negative);
        assert_eq!(detections_to_label(&dets(&[0.90]), 0.9).unwrap(), BinaryLabel::Positive);
        assert_eq!(detections_to_label(&dets(&[0.8999999]), 0.9).unwrap(), BinaryLabel::Negative);
    }

    #[test]
    fn rejects_bad_confidence() {
        assert!(matches!(
            detections_to_label(&dets(&[0.5, 1.5]), 0.9),
            Err(MetricsError::ConfidenceOutOfRange(_))
        ));
    }
}
