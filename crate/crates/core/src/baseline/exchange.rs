use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::ModelError;
use crate::dataset::TileRecord;
use crate::metrics::{read_predictions, MetricsError, Predictions};

pub const REQUEST_FILE: &str = "request.csv";
pub const SCORES_FILE: &str = "scores.csv";

/// Writes `request.csv` (tile_id,image_ref) into `dir` for an outside scorer.
pub fn write_score_request(dir: &Path, records: &[&TileRecord]) -> Result<PathBuf, ModelError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(REQUEST_FILE);
    let mut text = String::from("tile_id,image_ref\n");
    for r in records {
        text.push_str(&r.tile_id);
        text.push(',');
        text.push_str(&r.image_ref);
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Reads `scores.csv` from `dir` and checks it covers every requested tile.
pub fn read_scores(dir: &Path, expected: &[&str]) -> Result<HashMap<String, f64>, ModelError> {
    let path = dir.join(SCORES_FILE);
    if !path.exists() {
        return Err(ModelError::ScoresNotReady(path.display().to_string()));
    }
    let scores = match read_predictions(&path) {
        Ok(Predictions::Scores(m)) => m,
        Ok(Predictions::Labels(_)) => {
            return Err(ModelError::Parse {
                path: path.display().to_string(),
                line: 1,
                message: "expected header tile_id,score".into(),
            })
        }
        Err(MetricsError::ScoreOutOfRange(s)) => return Err(ModelError::ScoreOutOfRange(s)),
        Err(MetricsError::Parse { path, line, message }) => return Err(ModelError::Parse { path, line, message }),
        Err(MetricsError::Io(e)) => return Err(ModelError::Io(e)),
        Err(e) => {
            return Err(ModelError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: e.to_string(),
            })
        }
    };
    let mut missing: Vec<String> = expected
        .iter()
        .filter(|id| !scores.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(ModelError::MissingScores(missing));
    }
    Ok(scores)
}

/// Writes the request, then reads scores back if the scorer has produced them.
pub fn external_score(dir: &Path, records: &[&TileRecord]) -> Result<HashMap<String, f64>, ModelError> {
    write_score_request(dir, records)?;
    let ids: Vec<&str> = records.iter().map(|r| r.tile_id.as_str()).collect();
    read_scores(dir, &ids)
}
