use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{FeatureVector, LinearModel, ModelError, ModelKind};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Writes `tile_id,f0,…,f{d-1}` rows in the given order.
pub fn write_features(path: &Path, rows: &[(String, FeatureVector)]) -> Result<(), ModelError> {
    let d = rows.first().map_or(0, |(_, f)| f.dim());
    let mut text = String::from("tile_id");
    for i in 0..d {
        let _ = write!(text, ",f{i}");
    }
    text.push('\n');
    for (id, f) in rows {
        if f.dim() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: f.dim(),
            });
        }
        text.push_str(id);
        for v in &f.0 {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Vec<(String, FeatureVector)>, ModelError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"tile_id") || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("f{i}")) {
        return Err(parse_err(path, 1, "expected header tile_id,f0,f1,…"));
    }
    let d = cols.len() - 1;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(parse_err(path, i + 1, format!("expected {} fields, found {}", d + 1, fields.len())));
        }
        let values = fields[1..]
            .iter()
            .map(|v| v.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| parse_err(path, i + 1, "invalid feature value"))?;
        if !seen.insert(fields[0].to_string()) {
            return Err(parse_err(path, i + 1, format!("duplicate tile_id {:?}", fields[0])));
        }
        out.push((fields[0].to_string(), FeatureVector(values)));
    }
    Ok(out)
}

/// Lookup form of [`read_features`].
pub fn features_by_tile(rows: Vec<(String, FeatureVector)>) -> HashMap<String, FeatureVector> {
    rows.into_iter().collect()
}

/// Plain text: kind, c, d, bias, then one weight per line.
pub fn write_model(path: &Path, m: &LinearModel) -> Result<(), ModelError> {
    let mut text = format!("{}\n{}\n{}\n{}\n", m.kind.as_str(), m.c, m.dim(), m.bias);
    for w in &m.weights {
        let _ = writeln!(text, "{w}");
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<LinearModel, ModelError> {
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    if lines.len() < 4 {
        return Err(parse_err(path, lines.len() + 1, "truncated model header"));
    }
    let num = |i: usize| -> Result<f64, ModelError> {
        lines[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(path, i + 1, format!("invalid number {:?}", lines[i])))
    };
    let kind = ModelKind::parse(lines[0]).ok_or_else(|| parse_err(path, 1, format!("unknown kind {:?}", lines[0])))?;
    let c = num(1)?;
    let d: usize = lines[2]
        .parse()
        .map_err(|_| parse_err(path, 3, format!("invalid dimension {:?}", lines[2])))?;
    let bias = num(3)?;
    if lines.len() != 4 + d {
        return Err(parse_err(
            path,
            lines.len() + 1,
            format!("expected {d} weight lines, found {}", lines.len() - 4),
        ));
    }
    let weights = (4..4 + d).map(num).collect::<Result<Vec<_>, _>>()?;
    Ok(LinearModel { weights, bias, kind, c })
}
