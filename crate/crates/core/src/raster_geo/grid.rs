use serde::{Deserialize, Serialize};

use super::{TileSpec, WorldBBox};

// Relative slack for "exact division" of a bbox side by the footprint, so
// that 33 m / (330 px · 0.1 m) counts as one tile despite 0.1 being inexact.
const DIVISION_SLACK: f64 = 1e-9;

/// One cell of a tile grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTile {
    pub row: u32,
    pub col: u32,
    /// World top-left corner.
    pub anchor: (f64, f64),
    /// The tile extends past the right or bottom edge of the bbox.
    pub overhang: bool,
}

/// Covers `bbox` with non-overlapping square tiles, row-major from the
/// top-left corner. The last column/row may overhang and is flagged.
pub fn tile_grid(bbox: &WorldBBox, spec: &TileSpec) -> Vec<GridTile> {
    let fp = spec.footprint_m();
    let count = |extent: f64| -> u32 {
        let ratio = extent / fp;
        (ratio - ratio * DIVISION_SLACK).ceil().max(1.0) as u32
    };
    let nx = count(bbox.width());
    let ny = count(bbox.height());
    let overhangs = |n: u32, extent: f64| f64::from(n) * fp > extent * (1.0 + DIVISION_SLACK);

    let mut out = Vec::with_capacity((nx * ny) as usize);
    for row in 0..ny {
        for col in 0..nx {
            out.push(GridTile {
                row,
                col,
                anchor: (
                    bbox.min_x + f64::from(col) * fp,
                    bbox.max_y - f64::from(row) * fp,
                ),
                overhang: overhangs(col + 1, bbox.width()) || overhangs(row + 1, bbox.height()),
            });
        }
    }
    out
}
