use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, RegisterPoint, TileLabel, TileRecord};
use crate::raster_geo::{TileSpec, WorldBBox};

/// Half-width of the validation boxes drawn around register points.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 25.0;

const ATTEMPTS_PER_TILE: usize = 1000;

/// Random displacement of positive tiles relative to their register point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jitter {
    /// Point exactly at the tile center (evaluation sets).
    Off,
    /// Uniform offset within ±footprint/4 on each axis (training sets).
    Uniform { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSample {
    pub records: Vec<TileRecord>,
    /// Ids of register points outside the coverage area.
    pub skipped: Vec<String>,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// One positive tile per register point inside `coverage`, centered on the
/// point (up to `jitter`).
pub fn sample_positives(
    register: &[RegisterPoint],
    coverage: &WorldBBox,
    spec: &TileSpec,
    jitter: Jitter,
) -> PositiveSample {
    let fp = spec.footprint_m();
    let mut rng = match jitter {
        Jitter::Off => None,
        Jitter::Uniform { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for p in register {
        if !coverage.contains(p.x, p.y) {
            skipped.push(p.id.clone());
            continue;
        }
        let (ox, oy) = match rng.as_mut() {
            Some(rng) => (rng.gen_range(-fp / 4.0..=fp / 4.0), rng.gen_range(-fp / 4.0..=fp / 4.0)),
            None => (0.0, 0.0),
        };
        let anchor = (p.x + ox - fp / 2.0, p.y + oy + fp / 2.0);
        records.push(TileRecord::new(
            format!("pos-{}", sanitize(&p.id)),
            anchor,
            TileLabel::Positive,
        ));
    }
    PositiveSample { records, skipped }
}

/// Uniform grid of buckets over register points for rectangle queries.
struct PointIndex<'a> {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<&'a RegisterPoint>>,
}

impl<'a> PointIndex<'a> {
    fn new(points: &'a [RegisterPoint], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<&RegisterPoint>> = HashMap::new();
        for p in points {
            buckets
                .entry(((p.x / cell).floor() as i64, (p.y / cell).floor() as i64))
                .or_default()
                .push(p);
        }
        PointIndex { cell, buckets }
    }

    fn any_within(&self, b: &WorldBBox) -> bool {
        let lo = ((b.min_x / self.cell).floor() as i64, (b.min_y / self.cell).floor() as i64);
        let hi = ((b.max_x / self.cell).floor() as i64, (b.max_y / self.cell).floor() as i64);
        (lo.0..=hi.0).any(|i| {
            (lo.1..=hi.1).any(|j| {
                self.buckets
                    .get(&(i, j))
                    .is_some_and(|ps| ps.iter().any(|p| b.contains(p.x, p.y)))
            })
        })
    }
}

/// Draws `count` negative tiles uniformly inside `coverage`, rejecting any
/// whose footprint grown by `exclusion_radius` contains a register point.
///
/// Anchors lie on the `spec.resolution` lattice so tiles cut from a
/// lattice-aligned raster reproduce the footprint exactly.
pub fn sample_negatives(
    coverage: &WorldBBox,
    register: &[RegisterPoint],
    exclusion_radius: f64,
    count: usize,
    seed: u64,
    spec: &TileSpec,
) -> Result<Vec<TileRecord>, DatasetError> {
    spec.validate()?;
    if !(exclusion_radius >= 0.0 && exclusion_radius.is_finite()) {
        return Err(DatasetError::InvalidManifest(format!(
            "exclusion radius must be non-negative, got {exclusion_radius}"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let res = spec.resolution;
    let fp = spec.footprint_m();
    let x_range = ((coverage.min_x / res).ceil() as i64, ((coverage.max_x - fp) / res).floor() as i64);
    let y_range = (((coverage.min_y + fp) / res).ceil() as i64, (coverage.max_y / res).floor() as i64);
    if x_range.0 > x_range.1 || y_range.0 > y_range.1 {
        return Err(DatasetError::ExhaustedSampling {
            found: 0,
            requested: count,
            attempts: 0,
        });
    }

    let index = PointIndex::new(register, (fp + 2.0 * exclusion_radius).max(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = count.saturating_mul(ATTEMPTS_PER_TILE);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == cap {
            return Err(DatasetError::ExhaustedSampling {
                found: out.len(),
                requested: count,
                attempts,
            });
        }
        attempts += 1;
        let x = rng.gen_range(x_range.0..=x_range.1) as f64 * res;
        let y = rng.gen_range(y_range.0..=y_range.1) as f64 * res;
        if index.any_within(&spec.footprint_at(x, y).expand(exclusion_radius)) {
            continue;
        }
        out.push(TileRecord::new(
            format!("neg-{:06}", out.len()),
            (x, y),
            TileLabel::Negative,
        ));
    }
    Ok(out)
}
