use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GeoError, GeoTransform, TileSpec};

const RESOLUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bands {
    /// 24-bit RGB
    Rgb,
    /// RGB plus near-infrared as the 4th byte
    RgbIr,
}

impl Bands {
    pub fn count(self) -> usize {
        match self {
            Bands::Rgb => 3,
            Bands::RgbIr => 4,
        }
    }

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            3 => Some(Bands::Rgb),
            4 => Some(Bands::RgbIr),
            _ => None,
        }
    }
}

/// Interleaved 8-bit raster with its georeferencing.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    bands: Bands,
    data: Vec<u8>,
    pub transform: GeoTransform,
}

impl Raster {
    pub fn new(
        width: u32,
        height: u32,
        bands: Bands,
        data: Vec<u8>,
        transform: GeoTransform,
    ) -> Result<Self, GeoError> {
        if width == 0 || height == 0 {
            return Err(GeoError::InvalidRaster("empty raster".into()));
        }
        let expected = width as usize * height as usize * bands.count();
        if data.len() != expected {
            return Err(GeoError::InvalidRaster(format!(
                "buffer holds {} bytes, expected {expected}",
                data.len()
            )));
        }
        transform.validate()?;
        Ok(Raster {
            width,
            height,
            bands,
            data,
            transform,
        })
    }

    pub fn filled(width: u32, height: u32, bands: Bands, transform: GeoTransform) -> Result<Self, GeoError> {
        let len = width as usize * height as usize * bands.count();
        Self::new(width, height, bands, vec![0; len], transform)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bands(&self) -> Bands {
        self.bands
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, col: u32, row: u32) -> &[u8] {
        let n = self.bands.count();
        let i = (row as usize * self.width as usize + col as usize) * n;
        &self.data[i..i + n]
    }

    pub fn pixel_mut(&mut self, col: u32, row: u32) -> &mut [u8] {
        let n = self.bands.count();
        let i = (row as usize * self.width as usize + col as usize) * n;
        &mut self.data[i..i + n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    #[default]
    Error,
    PadZero,
}

/// Copies the `size_px`² block whose top-left corner lies at `anchor`.
///
/// The anchor is snapped to the nearest pixel edge; anchors that lie on the
/// raster's pixel grid are reproduced exactly by the returned transform.
pub fn extract_tile(
    r: &Raster,
    anchor: (f64, f64),
    spec: &TileSpec,
    edge_policy: EdgePolicy,
) -> Result<Raster, GeoError> {
    spec.validate()?;
    let raster_res = r.transform.a.abs();
    if (spec.resolution - raster_res).abs() > RESOLUTION_TOLERANCE {
        return Err(GeoError::ResolutionMismatch {
            tile: spec.resolution,
            raster: raster_res,
        });
    }
    // Corner of a pixel is half a pixel before its center.
    let p = r.transform.world_to_pixel(anchor.0, anchor.1)?;
    let col0 = (p.col + 0.5).round() as i64;
    let row0 = (p.row + 0.5).round() as i64;
    let size = spec.size_px;
    let (w, h) = (i64::from(r.width), i64::from(r.height));
    let inside = col0 >= 0 && row0 >= 0 && col0 + i64::from(size) <= w && row0 + i64::from(size) <= h;
    if !inside && edge_policy == EdgePolicy::Error {
        return Err(GeoError::OutOfBounds {
            col: col0,
            row: row0,
            size,
            width: r.width,
            height: r.height,
        });
    }

    let n = r.bands.count();
    let mut data = vec![0u8; size as usize * size as usize * n];
    let row_bytes = size as usize * n;
    // Column span that overlaps the raster, in tile coordinates.
    let c_lo = (-col0).clamp(0, i64::from(size));
    let c_hi = (w - col0).clamp(0, i64::from(size));
    if c_lo < c_hi {
        for tr in 0..i64::from(size) {
            let sr = row0 + tr;
            if sr < 0 || sr >= h {
                continue;
            }
            let src = ((sr * w + col0 + c_lo) as usize) * n;
            let len = ((c_hi - c_lo) as usize) * n;
            let dst = tr as usize * row_bytes + c_lo as usize * n;
            data[dst..dst + len].copy_from_slice(&r.data[src..src + len]);
        }
    }

    Raster::new(size, size, r.bands, data, r.transform.shifted(col0, row0))
}

/// World-file sidecar path: `tile.png` → `tile.pgw`, `tile.ppm` → `tile.pmw`.
pub fn world_file_path(image: &Path) -> PathBuf {
    let ext = image
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let world_ext = match ext.len() {
        0 => "wld".to_string(),
        1 => format!("{ext}w"),
        _ => {
            let mut chars = ext.chars();
            let first = chars.next().unwrap();
            let last = chars.last().unwrap();
            format!("{first}{last}w")
        }
    };
    image.with_extension(world_ext)
}

fn is_ppm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

/// Writes the pixels as PNG (RGB8/RGBA8) or binary PPM (RGB only), plus the
/// world-file sidecar.
pub fn write_raster(path: &Path, r: &Raster) -> Result<(), GeoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    if is_ppm(path) && r.bands != Bands::Rgb {
        return Err(GeoError::Image("PPM supports RGB rasters only".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    if is_ppm(path) {
        write!(out, "P6\n{} {}\n255\n", r.width, r.height)?;
        out.write_all(&r.data)?;
    } else {
        let mut enc = png::Encoder::new(&mut out, r.width, r.height);
        enc.set_color(match r.bands {
            Bands::Rgb => png::ColorType::Rgb,
            Bands::RgbIr => png::ColorType::Rgba,
        });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| GeoError::Image(e.to_string()))?;
        writer
            .write_image_data(&r.data)
            .map_err(|e| GeoError::Image(e.to_string()))?;
        writer.finish().map_err(|e| GeoError::Image(e.to_string()))?;
    }
    out.flush()?;
    std::fs::write(world_file_path(path), r.transform.to_world_file())?;
    Ok(())
}

/// Reads a PNG or PPM raster and its world-file sidecar.
pub fn read_raster(path: &Path, crs_id: &str) -> Result<Raster, GeoError> {
    let world = std::fs::read_to_string(world_file_path(path)).map_err(|e| {
        GeoError::WorldFile(format!("{}: {e}", world_file_path(path).display()))
    })?;
    let transform = GeoTransform::from_world_file(&world, crs_id)?;
    let reader = BufReader::new(File::open(path)?);
    let (width, height, bands, data) = if is_ppm(path) {
        read_ppm(reader)?
    } else {
        read_png(reader)?
    };
    Raster::new(width, height, bands, data, transform)
}

fn read_png(reader: BufReader<File>) -> Result<(u32, u32, Bands, Vec<u8>), GeoError> {
    let img = |e: png::DecodingError| GeoError::Image(e.to_string());
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(img)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| GeoError::Image("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(img)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(GeoError::Image(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let bands = match info.color_type {
        png::ColorType::Rgb => Bands::Rgb,
        png::ColorType::Rgba => Bands::RgbIr,
        other => return Err(GeoError::Image(format!("unsupported color type {other:?}"))),
    };
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, bands, buf))
}

fn read_ppm(mut reader: BufReader<File>) -> Result<(u32, u32, Bands, Vec<u8>), GeoError> {
    let bad = |m: &str| GeoError::Image(format!("PPM: {m}"));
    let mut header = Vec::new();
    // Magic, width, height, maxval; comments start with '#'.
    while header.len() < 4 {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad("truncated header"));
        }
        let content = line.split('#').next().unwrap_or("");
        header.extend(content.split_whitespace().map(str::to_owned));
    }
    if header[0] != "P6" {
        return Err(bad("only binary P6 is supported"));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    let mut data = vec![0; width as usize * height as usize * 3];
    reader.read_exact(&mut data)?;
    Ok((width, height, Bands::Rgb, data))
}
