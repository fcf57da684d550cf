//! Georeferenced raster model: affine pixel/world transforms, tile grids,
//! tile extraction and remote raster request construction.
//!
//! Coordinates are projected meters in an opaque CRS. Nothing here
//! reprojects or resamples; a CRS tag is only ever compared for equality.

mod grid;
mod raster;
mod remote;
mod transform;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{tile_grid, GridTile};
pub use raster::{
    extract_tile, read_raster, world_file_path, write_raster, Bands, EdgePolicy, Raster,
};
pub use remote::{build_remote_request, pixel_size_for, RemoteRequest};
pub use transform::{GeoTransform, PixelCoord, PixelIndex};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("transform is singular (determinant is zero)")]
    SingularTransform,
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid bounding box: {0}")]
    InvalidBBox(String),
    #[error("invalid tile spec: {0}")]
    InvalidTileSpec(String),
    #[error("tile at pixel ({col}, {row}) of size {size} lies outside the {width}x{height} raster")]
    OutOfBounds {
        col: i64,
        row: i64,
        size: u32,
        width: u32,
        height: u32,
    },
    #[error("tile resolution {tile} does not match raster resolution {raster}")]
    ResolutionMismatch { tile: f64, raster: f64 },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("world file: {0}")]
    WorldFile(String),
    #[error("url template: {0}")]
    TemplateError(String),
    #[error("raster image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned world rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldBBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl WorldBBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GeoError> {
        let b = WorldBBox {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        b.validate()?;
        Ok(b)
    }

    /// Square of side `2·half` centered on `(x, y)`.
    pub fn around(x: f64, y: f64, half: f64) -> Result<Self, GeoError> {
        Self::new(x - half, y - half, x + half, y + half)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let all = [self.min_x, self.min_y, self.max_x, self.max_y];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidBBox("non-finite coordinate".into()));
        }
        if !(self.min_x < self.max_x && self.min_y < self.max_y) {
            return Err(GeoError::InvalidBBox(format!(
                "min must be below max: ({}, {}, {}, {})",
                self.min_x, self.min_y, self.max_x, self.max_y
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    /// Closed containment (boundary counts).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    /// Closed intersection: shared edges and corners count.
    pub fn intersects(&self, other: &WorldBBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    /// Grown by `r` on every side.
    pub fn expand(&self, r: f64) -> WorldBBox {
        WorldBBox {
            min_x: self.min_x - r,
            min_y: self.min_y - r,
            max_x: self.max_x + r,
            max_y: self.max_y + r,
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> WorldBBox {
        WorldBBox {
            min_x: self.min_x + dx,
            min_y: self.min_y + dy,
            max_x: self.max_x + dx,
            max_y: self.max_y + dy,
        }
    }

    /// Parses `minx,miny,maxx,maxy`.
    pub fn parse(s: &str) -> Result<Self, GeoError> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| GeoError::InvalidBBox(format!("cannot parse {s:?}")))?;
        match parts[..] {
            [a, b, c, d] => Self::new(a, b, c, d),
            _ => Err(GeoError::InvalidBBox(format!(
                "expected minx,miny,maxx,maxy, got {s:?}"
            ))),
        }
    }
}

/// How a tile's reference point relates to its footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TileAnchor {
    Center,
    #[default]
    TopLeft,
}

impl TileAnchor {
    pub fn as_str(&self) -> &'static str {
        match self {
            TileAnchor::Center => "center",
            TileAnchor::TopLeft => "top_left",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "center" => Some(TileAnchor::Center),
            "top_left" => Some(TileAnchor::TopLeft),
            _ => None,
        }
    }
}

/// Square tile geometry: `size_px` pixels at `resolution` meters per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileSpec {
    pub size_px: u32,
    pub resolution: f64,
    pub anchor: TileAnchor,
}

impl TileSpec {
    pub fn new(size_px: u32, resolution: f64, anchor: TileAnchor) -> Result<Self, GeoError> {
        let s = TileSpec {
            size_px,
            resolution,
            anchor,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if self.size_px == 0 {
            return Err(GeoError::InvalidTileSpec("size_px must be positive".into()));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(GeoError::InvalidTileSpec(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Side length of the tile on the ground, in meters.
    pub fn footprint_m(&self) -> f64 {
        f64::from(self.size_px) * self.resolution
    }

    /// World top-left corner for a reference point interpreted per `anchor`.
    pub fn top_left_of(&self, x: f64, y: f64) -> (f64, f64) {
        match self.anchor {
            TileAnchor::TopLeft => (x, y),
            TileAnchor::Center => {
                let half = self.footprint_m() / 2.0;
                (x - half, y + half)
            }
        }
    }

    /// Ground footprint of a tile whose top-left corner is `(x, y)`.
    pub fn footprint_at(&self, x: f64, y: f64) -> WorldBBox {
        let side = self.footprint_m();
        WorldBBox {
            min_x: x,
            min_y: y - side,
            max_x: x + side,
            max_y: y,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_rejects_inverted() {
        assert!(WorldBBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(WorldBBox::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn bbox_parse() {
        let b = WorldBBox::parse("0, 0,33,33.5").unwrap();
        assert_eq!(b.max_y, 33.5);
        assert!(WorldBBox::parse("0,0,1").is_err());
    }

    #[test]
    fn closed_intersection_counts_touching_edges() {
        let a = WorldBBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = WorldBBox::new(1.0, 0.0, 2.0, 1.0).unwrap();
        let c = WorldBBox::new(1.0, 1.0, 2.0, 2.0).unwrap();
        let d = WorldBBox::new(1.5, 0.0, 2.0, 1.0).unwrap();
        assert!(a.intersects(&b));
        assert!(a.intersects(&c));
        assert!(!a.intersects(&d));
    }

    #[test]
    fn footprint_sizes() {
        let s = TileSpec::new(200, 0.1, TileAnchor::TopLeft).unwrap();
        assert!((s.footprint_m() - 20.0).abs() < 1e-12);
        let s = TileSpec::new(330, 0.1, TileAnchor::TopLeft).unwrap();
        assert!((s.footprint_m() - 33.0).abs() < 1e-12);
        assert!(TileSpec::new(0, 0.1, TileAnchor::TopLeft).is_err());
        assert!(TileSpec::new(10, -0.1, TileAnchor::TopLeft).is_err());
    }

    #[test]
    fn center_anchor_offsets_by_half_footprint() {
        let s = TileSpec::new(200, 0.1, TileAnchor::Center).unwrap();
        assert_eq!(s.top_left_of(100.0, 100.0), (90.0, 110.0));
        let fp = s.footprint_at(90.0, 110.0);
        assert_eq!((fp.min_x, fp.min_y, fp.max_x, fp.max_y), (90.0, 90.0, 110.0, 110.0));
    }
}
