use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// A register entry: an address point for a known installation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub attributes: BTreeMap<String, String>,
    /// Register name, e.g. "LANUV".
    pub source: String,
}

impl RegisterPoint {
    pub fn new(id: impl Into<String>, x: f64, y: f64, source: impl Into<String>) -> Self {
        RegisterPoint {
            id: id.into(),
            x,
            y,
            attributes: BTreeMap::new(),
            source: source.into(),
        }
    }
}

/// Reads a register CSV with header `id,x,y` followed by any extra attribute
/// columns. Ids must be unique.
pub fn read_register(path: &Path, source: &str) -> Result<Vec<RegisterPoint>, DatasetError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| DatasetError::Register(e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| DatasetError::Register(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::Register(format!("missing column {name:?}")))
    };
    let (id_col, x_col, y_col) = (col("id")?, col("x")?, col("y")?);

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DatasetError::Register(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize, what: &str| -> Result<f64, DatasetError> {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| DatasetError::ParseError {
                    line,
                    message: format!("invalid {what} coordinate"),
                })
        };
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(DatasetError::ParseError {
                line,
                message: "empty id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(DatasetError::ParseError {
                line,
                message: format!("duplicate id {id:?}"),
            });
        }
        let mut point = RegisterPoint::new(id, num(x_col, "x")?, num(y_col, "y")?, source);
        for (i, h) in headers.iter().enumerate() {
            if i != id_col && i != x_col && i != y_col {
                point
                    .attributes
                    .insert(h.to_string(), rec.get(i).unwrap_or("").to_string());
            }
        }
        out.push(point);
    }
    Ok(out)
}

/// Writes `id,x,y` plus the union of attribute columns.
pub fn write_register(path: &Path, points: &[RegisterPoint]) -> Result<(), DatasetError> {
    let keys: Vec<String> = points
        .iter()
        .flat_map(|p| p.attributes.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut w = csv::Writer::from_path(path).map_err(|e| DatasetError::Register(e.to_string()))?;
    let mut header = vec!["id".to_string(), "x".into(), "y".into()];
    header.extend(keys.iter().cloned());
    w.write_record(&header)
        .map_err(|e| DatasetError::Register(e.to_string()))?;
    for p in points {
        let mut row = vec![p.id.clone(), p.x.to_string(), p.y.to_string()];
        row.extend(keys.iter().map(|k| p.attributes.get(k).cloned().unwrap_or_default()));
        w.write_record(&row)
            .map_err(|e| DatasetError::Register(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_extra_columns_as_attributes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("reg.csv");
        std::fs::write(&p, "id,x,y,street,kwp\nA1,10.5,20,\"Main St, 4\",5.2\nA2,11,21,Elm,3\n").unwrap();
        let reg = read_register(&p, "LANUV").unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg[0].attributes["street"], "Main St, 4");
        assert_eq!(reg[1].source, "LANUV");

        let out = dir.path().join("out.csv");
        write_register(&out, &reg).unwrap();
        assert_eq!(read_register(&out, "LANUV").unwrap(), reg);
    }

    #[test]
    fn duplicate_ids_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("reg.csv");
        std::fs::write(&p, "id,x,y\nA,1,2\nA,3,4\n").unwrap();
        let err = read_register(&p, "r").unwrap_err();
        assert!(matches!(err, DatasetError::ParseError { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("reg.csv");
        std::fs::write(&p, "id,x\nA,1\n").unwrap();
        assert!(matches!(read_register(&p, "r"), Err(DatasetError::Register(_))));
    }
}
