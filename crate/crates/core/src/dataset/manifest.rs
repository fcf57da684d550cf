//! Line-oriented manifest file.
//!
//! ```text
//! # pvtiles manifest v1
//! # name=heerlen
//! # crs=EPSG:28992
//! # size_px=200
//! # resolution=0.1
//! # anchor=top_left
//! # seed=42
//! tile_id,image_ref,anchor_x,anchor_y,label,split
//! pos-17,tiles/pos-17.png,190012.5,5640020.25,positive,train
//! ```
//!
//! Floats are written in shortest round-trip form, so read-after-write is
//! lossless.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{DatasetError, DatasetManifest, Split, TileLabel, TileRecord};
use crate::raster_geo::{TileAnchor, TileSpec};

pub const MANIFEST_HEADER: &str = "tile_id,image_ref,anchor_x,anchor_y,label,split";
const MAGIC: &str = "# pvtiles manifest v1";

fn check_field(what: &str, value: &str) -> Result<(), DatasetError> {
    if value.is_empty() || value.contains([',', '\n', '\r']) {
        return Err(DatasetError::InvalidManifest(format!(
            "{what} {value:?} must be non-empty without commas or newlines"
        )));
    }
    Ok(())
}

pub fn write_manifest(path: &Path, m: &DatasetManifest) -> Result<(), DatasetError> {
    m.validate()?;
    for meta in [&m.name, &m.crs_id] {
        if meta.contains(['\n', '\r']) {
            return Err(DatasetError::InvalidManifest("metadata contains a newline".into()));
        }
    }
    let mut text = String::with_capacity(64 * (m.records.len() + 8));
    let _ = writeln!(text, "{MAGIC}");
    let _ = writeln!(text, "# name={}", m.name);
    let _ = writeln!(text, "# crs={}", m.crs_id);
    let _ = writeln!(text, "# size_px={}", m.spec.size_px);
    let _ = writeln!(text, "# resolution={}", m.spec.resolution);
    let _ = writeln!(text, "# anchor={}", m.spec.anchor.as_str());
    let _ = writeln!(text, "# seed={}", m.seed);
    let _ = writeln!(text, "{MANIFEST_HEADER}");
    for r in &m.records {
        check_field("tile_id", &r.tile_id)?;
        check_field("image_ref", &r.image_ref)?;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.tile_id, r.image_ref, r.anchor.0, r.anchor.1, r.label, r.split
        );
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut name = None;
    let mut crs = None;
    let mut size_px = None;
    let mut resolution = None;
    let mut anchor = TileAnchor::TopLeft;
    let mut seed = 0u64;
    let mut header_seen = false;
    let mut records = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let err = |message: String| DatasetError::ParseError {
            line: line_no,
            message,
        };
        if !header_seen {
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.trim_start().split_once('=') else {
                    continue;
                };
                match key.trim() {
                    "name" => name = Some(value.to_string()),
                    "crs" => crs = Some(value.to_string()),
                    "size_px" => {
                        size_px = Some(value.parse::<u32>().map_err(|e| err(format!("size_px: {e}")))?)
                    }
                    "resolution" => {
                        resolution = Some(value.parse::<f64>().map_err(|e| err(format!("resolution: {e}")))?)
                    }
                    "anchor" => {
                        anchor = TileAnchor::parse(value).ok_or_else(|| err(format!("unknown anchor {value:?}")))?
                    }
                    "seed" => seed = value.parse().map_err(|e| err(format!("seed: {e}")))?,
                    _ => {}
                }
                continue;
            }
            if line.trim() != MANIFEST_HEADER {
                return Err(err(format!("expected header {MANIFEST_HEADER:?}")));
            }
            header_seen = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let coord = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid {what} {s:?}")))
        };
        records.push(TileRecord {
            tile_id: fields[0].to_string(),
            image_ref: fields[1].to_string(),
            anchor: (coord(fields[2], "anchor_x")?, coord(fields[3], "anchor_y")?),
            label: TileLabel::parse(fields[4]).ok_or_else(|| err(format!("unknown label {:?}", fields[4])))?,
            split: Split::parse(fields[5]).ok_or_else(|| err(format!("unknown split {:?}", fields[5])))?,
        });
    }
    if !header_seen {
        return Err(DatasetError::ParseError {
            line: 0,
            message: "missing header line".into(),
        });
    }
    let missing = |what: &str| DatasetError::InvalidManifest(format!("missing {what} metadata"));
    let spec = TileSpec::new(
        size_px.ok_or_else(|| missing("size_px"))?,
        resolution.ok_or_else(|| missing("resolution"))?,
        anchor,
    )?;
    let m = DatasetManifest {
        name: name.unwrap_or_default(),
        spec,
        crs_id: crs.ok_or_else(|| missing("crs"))?,
        records,
        seed,
    };
    m.validate()?;
    Ok(m)
}
