use serde::{Deserialize, Serialize};

use super::GeoError;

/// Six-coefficient affine map from pixel indices to projected world coordinates.
///
/// Follows world-file semantics: `(c, f)` is the world position of the
/// *center* of pixel `(0, 0)`, so
///
/// ```text
/// x = c + a·col + b·row
/// y = f + d·col + e·row
/// ```
///
/// For a north-up raster `b = d = 0` and `e < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    /// x-scale (meters per pixel along a row)
    pub a: f64,
    /// row rotation
    pub d: f64,
    /// column rotation
    pub b: f64,
    /// y-scale, negative for north-up
    pub e: f64,
    /// world x of the center of pixel (0, 0)
    pub c: f64,
    /// world y of the center of pixel (0, 0)
    pub f: f64,
    /// Opaque CRS tag, compared for equality only.
    pub crs_id: String,
}

/// Integer pixel address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelIndex {
    pub col: u32,
    pub row: u32,
}

/// Fractional pixel position; integer values are pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub col: f64,
    pub row: f64,
}

impl From<PixelIndex> for PixelCoord {
    fn from(p: PixelIndex) -> Self {
        PixelCoord {
            col: f64::from(p.col),
            row: f64::from(p.row),
        }
    }
}

impl GeoTransform {
    /// North-up transform with square pixels whose top-left *corner* sits at
    /// `(left, top)`.
    pub fn north_up(left: f64, top: f64, resolution: f64, crs_id: impl Into<String>) -> Self {
        GeoTransform {
            a: resolution,
            d: 0.0,
            b: 0.0,
            e: -resolution,
            c: left + resolution / 2.0,
            f: top - resolution / 2.0,
            crs_id: crs_id.into(),
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    /// Checks the invertibility invariants.
    pub fn validate(&self) -> Result<(), GeoError> {
        let coeffs = [self.a, self.b, self.c, self.d, self.e, self.f];
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidTransform("non-finite coefficient".into()));
        }
        if self.determinant() == 0.0 {
            return Err(GeoError::SingularTransform);
        }
        if self.a == 0.0 || self.e == 0.0 {
            return Err(GeoError::InvalidTransform(
                "pixel scale a and e must be non-zero".into(),
            ));
        }
        Ok(())
    }

    pub fn pixel_to_world(&self, p: impl Into<PixelCoord>) -> (f64, f64) {
        let p = p.into();
        (
            self.c + self.a * p.col + self.b * p.row,
            self.f + self.d * p.col + self.e * p.row,
        )
    }

    /// Inverse of [`pixel_to_world`](Self::pixel_to_world).
    pub fn world_to_pixel(&self, x: f64, y: f64) -> Result<PixelCoord, GeoError> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(GeoError::SingularTransform);
        }
        let dx = x - self.c;
        let dy = y - self.f;
        Ok(PixelCoord {
            col: (self.e * dx - self.b * dy) / det,
            row: (self.a * dy - self.d * dx) / det,
        })
    }

    /// World position of the outer top-left corner of pixel (0, 0).
    pub fn corner(&self) -> (f64, f64) {
        self.pixel_to_world(PixelCoord {
            col: -0.5,
            row: -0.5,
        })
    }

    /// The same affine map re-anchored so that `(col, row)` of this raster
    /// becomes pixel (0, 0).
    pub fn shifted(&self, col: i64, row: i64) -> GeoTransform {
        let (c, f) = self.pixel_to_world(PixelCoord {
            col: col as f64,
            row: row as f64,
        });
        GeoTransform {
            c,
            f,
            ..self.clone()
        }
    }

    /// Serializes as the six world-file lines `a, d, b, e, c, f`.
    pub fn to_world_file(&self) -> String {
        [self.a, self.d, self.b, self.e, self.c, self.f]
            .iter()
            .map(|v| format!("{v}\n"))
            .collect()
    }

    pub fn from_world_file(text: &str, crs_id: impl Into<String>) -> Result<Self, GeoError> {
        let mut values = [0.0f64; 6];
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        for (i, slot) in values.iter_mut().enumerate() {
            let line = lines
                .next()
                .ok_or_else(|| GeoError::WorldFile(format!("expected 6 lines, found {i}")))?;
            *slot = line.trim().parse().map_err(|_| {
                GeoError::WorldFile(format!("line {}: not a number: {:?}", i + 1, line.trim()))
            })?;
        }
        if lines.next().is_some() {
            return Err(GeoError::WorldFile("more than 6 lines".into()));
        }
        let [a, d, b, e, c, f] = values;
        Ok(GeoTransform {
            a,
            d,
            b,
            e,
            c,
            f,
            crs_id: crs_id.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: f64, b: f64, d: f64, e: f64, c: f64, f: f64) -> GeoTransform {
        GeoTransform {
            a,
            b,
            d,
            e,
            c,
            f,
            crs_id: "EPSG:test".into(),
        }
    }

    #[test]
    fn identity_scale_north_up() {
        let g = t(1.0, 0.0, 0.0, -1.0, 0.0, 0.0);
        assert_eq!(g.pixel_to_world(PixelIndex { col: 5, row: 3 }), (5.0, -3.0));
    }

    #[test]
    fn origin_is_pixel_center() {
        let g = t(0.1, 0.0, 0.0, -0.1, 200000.05, 500000.05);
        assert_eq!(
            g.pixel_to_world(PixelIndex { col: 0, row: 0 }),
            (200000.05, 500000.05)
        );
        let p = g.world_to_pixel(200000.05, 500000.05).unwrap();
        assert_eq!((p.col, p.row), (0.0, 0.0));
    }

    #[test]
    fn half_pixel_offset() {
        let g = t(0.1, 0.0, 0.0, -0.1, 200000.05, 500000.05);
        let p = g.world_to_pixel(200000.05 + 0.05, 500000.05).unwrap();
        assert!((p.col - 0.5).abs() < 1e-9);
        assert!(p.row.abs() < 1e-9);
    }

    #[test]
    fn degenerate_is_singular() {
        let g = t(0.0, 0.0, 0.0, 0.0, 1.0, 1.0);
        assert!(matches!(g.world_to_pixel(1.0, 1.0), Err(GeoError::SingularTransform)));
        assert!(matches!(g.validate(), Err(GeoError::SingularTransform)));
    }

    #[test]
    fn corner_of_north_up() {
        let g = GeoTransform::north_up(100.0, 200.0, 0.1, "x");
        let (x, y) = g.corner();
        assert!((x - 100.0).abs() < 1e-9 && (y - 200.0).abs() < 1e-9);
    }

    #[test]
    fn world_file_round_trip() {
        let g = t(0.1, 0.001, -0.002, -0.1, 200000.05, 500000.05);
        let text = g.to_world_file();
        assert_eq!(text.lines().count(), 6);
        assert!(text.ends_with('\n'));
        let back = GeoTransform::from_world_file(&text, "EPSG:test").unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn world_file_rejects_short_input() {
        assert!(matches!(
            GeoTransform::from_world_file("1\n0\n0\n", "x"),
            Err(GeoError::WorldFile(_))
        ));
    }
}
