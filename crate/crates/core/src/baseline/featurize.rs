use super::FeatureVector;
use crate::raster_geo::Raster;

pub const FEATURE_DIM: usize = 8;

/// Per-band mean and variance of a tile, scaled to [0, 1], for four bands
/// (R, G, B, IR). RGB tiles report zeros for the IR pair.
pub fn band_statistics(tile: &Raster) -> FeatureVector {
    let n = tile.bands().count();
    let pixels = (tile.width() as usize * tile.height() as usize) as f64;
    let mut sum = [0.0f64; 4];
    let mut sum_sq = [0.0f64; 4];
    for px in tile.data().chunks_exact(n) {
        for (b, &v) in px.iter().enumerate() {
            let v = f64::from(v) / 255.0;
            sum[b] += v;
            sum_sq[b] += v * v;
        }
    }
    let mut out = Vec::with_capacity(FEATURE_DIM);
    for b in 0..4 {
        if b < n {
            let mean = sum[b] / pixels;
            out.push(mean);
            out.push((sum_sq[b] / pixels - mean * mean).max(0.0));
        } else {
            out.extend([0.0, 0.0]);
        }
    }
    FeatureVector(out)
}
