//! Reconciles predicted-positive tiles against a register whose address
//! points have been promoted to polygons, separating register-confirmed
//! detections from newly discovered installations.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegisterPoint;
use crate::metrics::{confusion, round2, BinaryLabel, MetricsError};
use crate::raster_geo::{GeoError, WorldBBox};

/// Half side of the square drawn around each register point.
pub const DEFAULT_HALF_SIZE: f64 = 25.0;

#[derive(Debug, Error)]
pub enum ReconcileError {
    #[error("CRS mismatch: tiles in {tiles:?}, polygons in {polygons:?}")]
    CrsMismatch { tiles: String, polygons: String },
    #[error("true-positive tile {0} has no match flag")]
    MissingFlag(String),
    #[error("invalid polygon {id}: {reason}")]
    InvalidPolygon { id: String, reason: String },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Register footprint. Only axis-aligned rectangles are supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterPolygon {
    pub id: String,
    /// Closed ring: first vertex repeated at the end.
    pub ring: Vec<(f64, f64)>,
    pub source_point_id: String,
}

impl RegisterPolygon {
    pub fn rectangle(id: impl Into<String>, b: &WorldBBox, source_point_id: impl Into<String>) -> Self {
        RegisterPolygon {
            id: id.into(),
            ring: vec![
                (b.min_x, b.min_y),
                (b.max_x, b.min_y),
                (b.max_x, b.max_y),
                (b.min_x, b.max_y),
                (b.min_x, b.min_y),
            ],
            source_point_id: source_point_id.into(),
        }
    }

    /// Validates a ring: closed, every edge axis-aligned, positive area, and
    /// filling its bounding box (a rectangle, possibly with collinear extra
    /// vertices).
    pub fn from_ring(
        id: impl Into<String>,
        ring: Vec<(f64, f64)>,
        source_point_id: impl Into<String>,
    ) -> Result<Self, ReconcileError> {
        let id = id.into();
        let invalid = |reason: &str| ReconcileError::InvalidPolygon {
            id: id.clone(),
            reason: reason.into(),
        };
        if ring.len() < 4 {
            return Err(invalid("ring needs at least 3 distinct vertices"));
        }
        if ring.first() != ring.last() {
            return Err(invalid("ring is not closed"));
        }
        if ring.windows(2).any(|e| e[0].0 != e[1].0 && e[0].1 != e[1].1) {
            return Err(invalid("edges must be axis-aligned"));
        }
        let p = RegisterPolygon {
            id: id.clone(),
            ring,
            source_point_id: source_point_id.into(),
        };
        let area = p.area();
        if area <= 0.0 {
            return Err(invalid("area must be positive"));
        }
        let b = p.bounds();
        if (area - b.width() * b.height()).abs() > 1e-9 * area {
            return Err(invalid("ring is not a rectangle"));
        }
        Ok(p)
    }

    pub fn bounds(&self) -> WorldBBox {
        let (mut b, rest) = (
            WorldBBox {
                min_x: self.ring[0].0,
                min_y: self.ring[0].1,
                max_x: self.ring[0].0,
                max_y: self.ring[0].1,
            },
            &self.ring[1..],
        );
        for &(x, y) in rest {
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
        b
    }

    /// Unsigned area of the ring.
    pub fn area(&self) -> f64 {
        let twice: f64 = self
            .ring
            .windows(2)
            .map(|e| e[0].0 * e[1].1 - e[1].0 * e[0].1)
            .sum();
        twice.abs() / 2.0
    }
}

/// Axis-aligned square of side `2·half_size` centered on the point.
pub fn point_to_polygon(p: &RegisterPoint, half_size: f64) -> Result<RegisterPolygon, ReconcileError> {
    if !(half_size > 0.0 && half_size.is_finite()) {
        return Err(ReconcileError::InvalidPolygon {
            id: p.id.clone(),
            reason: format!("half size must be positive, got {half_size}"),
        });
    }
    let b = WorldBBox::around(p.x, p.y, half_size)?;
    Ok(RegisterPolygon::rectangle(p.id.clone(), &b, p.id.clone()))
}

/// Per tile: does its footprint touch any polygon (closed intersection)?
pub fn match_tiles(
    tiles: &[WorldBBox],
    tiles_crs: &str,
    polygons: &[RegisterPolygon],
    polygons_crs: &str,
) -> Result<Vec<bool>, ReconcileError> {
    if tiles_crs != polygons_crs {
        return Err(ReconcileError::CrsMismatch {
            tiles: tiles_crs.into(),
            polygons: polygons_crs.into(),
        });
    }
    let bounds: Vec<WorldBBox> = polygons.iter().map(RegisterPolygon::bounds).collect();
    Ok(tiles
        .iter()
        .map(|t| bounds.iter().any(|b| t.intersects(b)))
        .collect())
}

/// Ids of polygons that no tile touches: register entries the predictions
/// do not confirm.
pub fn unconfirmed_register(tiles: &[WorldBBox], polygons: &[RegisterPolygon]) -> Vec<String> {
    polygons
        .iter()
        .filter(|p| {
            let b = p.bounds();
            !tiles.iter().any(|t| t.intersects(&b))
        })
        .map(|p| p.id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub tp_in_register: u64,
    pub tp_new: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ReconciliationReport {
    pub fn tp(&self) -> u64 {
        self.tp_in_register + self.tp_new
    }

    /// `tp_new / tp`; absent when there are no true positives.
    pub fn new_fraction(&self) -> Option<f64> {
        (self.tp() > 0).then(|| self.tp_new as f64 / self.tp() as f64)
    }

    pub fn render_text(&self) -> String {
        let tp = self.tp();
        let pct = |n: u64| if tp == 0 { 0.0 } else { n as f64 / tp as f64 * 100.0 };
        let mut out = format!("{:<18}{:>8}{:>14}\n", "Result", "Amount", "% of total");
        out += &format!("{:<18}{:>8}{:>14.2}\n", "in register", self.tp_in_register, round2(pct(self.tp_in_register)));
        out += &format!("{:<18}{:>8}{:>14.2}\n", "not in register", self.tp_new, round2(pct(self.tp_new)));
        out += &format!("{:<18}{:>8}{:>14.2}\n", "Total", tp, if tp == 0 { 0.0 } else { 100.0 });
        out.push('\n');
        match self.new_fraction() {
            Some(f) => out += &format!("not in register {} ({:.2}%)\n", self.tp_new, round2(f * 100.0)),
            None => out += "not in register: no true positives\n",
        }
        out += &format!("false positives {}, false negatives {}, true negatives {}\n", self.fp, self.fn_, self.tn);
        out
    }
}

impl std::ops::Add for ReconciliationReport {
    type Output = ReconciliationReport;

    fn add(self, o: Self) -> Self {
        ReconciliationReport {
            tp_in_register: self.tp_in_register + o.tp_in_register,
            tp_new: self.tp_new + o.tp_new,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Splits true positives by their register-match flag; the other cells pass
/// through from the confusion matrix.
pub fn reconcile(
    predicted: &HashMap<String, BinaryLabel>,
    truth: &HashMap<String, BinaryLabel>,
    matched: &HashMap<String, bool>,
) -> Result<ReconciliationReport, ReconcileError> {
    let m = confusion(predicted, truth)?;
    let mut tp_ids: Vec<&String> = predicted
        .iter()
        .filter(|(id, p)| **p == BinaryLabel::Positive && truth[*id] == BinaryLabel::Positive)
        .map(|(id, _)| id)
        .collect();
    tp_ids.sort();
    let mut report = ReconciliationReport {
        fp: m.fp,
        fn_: m.fn_,
        tn: m.tn,
        ..Default::default()
    };
    for id in tp_ids {
        match matched.get(id) {
            Some(true) => report.tp_in_register += 1,
            Some(false) => report.tp_new += 1,
            None => return Err(ReconcileError::MissingFlag(id.clone())),
        }
    }
    Ok(report)
}

pub fn read_polygons(path: &Path) -> Result<Vec<RegisterPolygon>, ReconcileError> {
    let parse = |line: usize, message: String| ReconcileError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse(0, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["id", "minx", "miny", "maxx", "maxy", "source_point_id"] {
        return Err(parse(1, "expected header id,minx,miny,maxx,maxy,source_point_id".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 4];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rec[i + 1]
                .parse()
                .map_err(|_| parse(line, format!("invalid coordinate {:?}", &rec[i + 1])))?;
        }
        let b = WorldBBox::new(v[0], v[1], v[2], v[3]).map_err(|e| parse(line, e.to_string()))?;
        out.push(RegisterPolygon::rectangle(&rec[0], &b, &rec[5]));
    }
    Ok(out)
}

pub fn write_polygons(path: &Path, polygons: &[RegisterPolygon]) -> Result<(), ReconcileError> {
    let to_err = |e: csv::Error| ReconcileError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["id", "minx", "miny", "maxx", "maxy", "source_point_id"])
        .map_err(to_err)?;
    for p in polygons {
        let b = p.bounds();
        w.write_record([
            p.id.clone(),
            b.min_x.to_string(),
            b.min_y.to_string(),
            b.max_x.to_string(),
            b.max_y.to_string(),
            p.source_point_id.clone(),
        ])
        .map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}
