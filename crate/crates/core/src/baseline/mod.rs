//! Linear baseline classifier over simple per-band tile statistics, plus the
//! file exchange used when scores come from an outside model.

mod exchange;
mod featurize;
mod io;
mod model;

pub use exchange::{external_score, read_scores, write_score_request, REQUEST_FILE, SCORES_FILE};
pub use featurize::{band_statistics, FEATURE_DIM};
pub use io::{features_by_tile, read_features, read_model, write_features, write_model};
pub use model::{
    classify, predict_score, sigmoid, train, train_traced, FeatureVector, LinearModel, ModelKind, TrainConfig,
    DEFAULT_CLASSIFY_THRESHOLD,
};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("no score for {} tile(s): {}", .0.len(), .0.join(", "))]
    MissingScores(Vec<String>),
    #[error("external scores not ready: {0} does not exist")]
    ScoresNotReady(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Geo(#[from] crate::raster_geo::GeoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
