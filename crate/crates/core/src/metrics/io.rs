use std::collections::HashMap;
use std::path::Path;

use super::{threshold_label, BinaryLabel, BoxPx, Detection, MetricsError};

/// Contents of a predictions file: either `tile_id,score` or `tile_id,label`.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Scores(HashMap<String, f64>),
    Labels(HashMap<String, BinaryLabel>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Scores(m) => m.len(),
            Predictions::Labels(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scores are thresholded inclusively; label files pass through.
    pub fn into_labels(self, threshold: f64) -> Result<HashMap<String, BinaryLabel>, MetricsError> {
        match self {
            Predictions::Labels(m) => Ok(m),
            Predictions::Scores(m) => m
                .into_iter()
                .map(|(k, s)| threshold_label(s, threshold).map(|l| (k, l)))
                .collect(),
        }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> MetricsError {
    MetricsError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, MetricsError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))
}

fn rows(path: &Path) -> Result<(Vec<String>, Vec<(usize, csv::StringRecord)>), MetricsError> {
    let mut rdr = reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok((header, out))
}

fn insert_unique<V>(map: &mut HashMap<String, V>, path: &Path, line: usize, id: &str, v: V) -> Result<(), MetricsError> {
    if id.is_empty() {
        return Err(parse_err(path, line, "empty tile_id"));
    }
    if map.insert(id.to_string(), v).is_some() {
        return Err(parse_err(path, line, format!("duplicate tile_id {id:?}")));
    }
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Predictions, MetricsError> {
    let (header, records) = rows(path)?;
    match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["tile_id", "score"] => {
            let mut m = HashMap::with_capacity(records.len());
            for (line, rec) in records {
                let score: f64 = rec[1]
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("invalid score {:?}", &rec[1])))?;
                if !(0.0..=1.0).contains(&score) {
                    return Err(MetricsError::ScoreOutOfRange(score));
                }
                insert_unique(&mut m, path, line, &rec[0], score)?;
            }
            Ok(Predictions::Scores(m))
        }
        ["tile_id", "label"] => read_labels(path).map(Predictions::Labels),
        _ => Err(parse_err(path, 1, "expected header tile_id,score or tile_id,label")),
    }
}

pub fn read_labels(path: &Path) -> Result<HashMap<String, BinaryLabel>, MetricsError> {
    let (header, records) = rows(path)?;
    if header != ["tile_id", "label"] {
        return Err(parse_err(path, 1, "expected header tile_id,label"));
    }
    let mut m = HashMap::with_capacity(records.len());
    for (line, rec) in records {
        let label =
            BinaryLabel::parse(&rec[1]).ok_or_else(|| parse_err(path, line, format!("invalid label {:?}", &rec[1])))?;
        insert_unique(&mut m, path, line, &rec[0], label)?;
    }
    Ok(m)
}

/// Reads `tile_id,x,y,w,h,confidence`; several rows per tile are allowed.
pub fn read_detections(path: &Path) -> Result<HashMap<String, Vec<Detection>>, MetricsError> {
    let (header, records) = rows(path)?;
    if header != ["tile_id", "x", "y", "w", "h", "confidence"] {
        return Err(parse_err(path, 1, "expected header tile_id,x,y,w,h,confidence"));
    }
    let mut m: HashMap<String, Vec<Detection>> = HashMap::new();
    for (line, rec) in records {
        let mut v = [0.0f64; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rec[i + 1]
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid number {:?}", &rec[i + 1])))?;
        }
        let [x, y, w, h, confidence] = v;
        m.entry(rec[0].to_string())
            .or_default()
            .push(Detection::new(BoxPx { x, y, w, h }, confidence));
    }
    Ok(m)
}

fn write_sorted<V>(path: &Path, header: &str, map: &HashMap<String, V>, fmt: impl Fn(&V) -> String) -> Result<(), MetricsError> {
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    let mut w = csv::Writer::from_path(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let to_err = |e: csv::Error| parse_err(path, 0, e.to_string());
    w.write_record(header.split(',')).map_err(to_err)?;
    for k in keys {
        w.write_record([k.as_str(), &fmt(&map[k])]).map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scores(path: &Path, scores: &HashMap<String, f64>) -> Result<(), MetricsError> {
    write_sorted(path, "tile_id,score", scores, |s| s.to_string())
}

pub fn write_labels(path: &Path, labels: &HashMap<String, BinaryLabel>) -> Result<(), MetricsError> {
    write_sorted(path, "tile_id,label", labels, |l| l.as_str().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.csv");
        std::fs::write(&s, "tile_id,score\na,0.93\nb,0.5\nc,0.1\n").unwrap();
        let labels = read_predictions(&s).unwrap().into_labels(0.5).unwrap();
        assert_eq!(labels["a"], BinaryLabel::Positive);
        assert_eq!(labels["b"], BinaryLabel::Positive);
        assert_eq!(labels["c"], BinaryLabel::Negative);

        let l = dir.path().join("l.csv");
        write_labels(&l, &labels).unwrap();
        assert_eq!(read_predictions(&l).unwrap(), Predictions::Labels(labels));
    }

    #[test]
    fn score_range_checked() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.csv");
        std::fs::write(&s, "tile_id,score\na,1.2\n").unwrap();
        assert!(matches!(read_predictions(&s), Err(MetricsError::ScoreOutOfRange(_))));
    }

    #[test]
    fn duplicate_tile_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.csv");
        std::fs::write(&s, "tile_id,label\na,pos\na,neg\n").unwrap();
        match read_predictions(&s).unwrap_err() {
            MetricsError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn detections_grouped_by_tile() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "tile_id,x,y,w,h,confidence\na,1,2,3,4,0.95\na,5,5,2,2,0.2\nb,0,0,1,1,0.5\n").unwrap();
        let d = read_detections(&p).unwrap();
        assert_eq!(d["a"].len(), 2);
        assert_eq!(d["b"][0].confidence, 0.5);
    }
}
