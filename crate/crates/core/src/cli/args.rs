use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baseline::{ModelKind, DEFAULT_CLASSIFY_THRESHOLD};
use crate::dataset::DEFAULT_EXCLUSION_RADIUS;
use crate::metrics::DEFAULT_DETECTION_THRESHOLD;
use crate::raster_geo::WorldBBox;
use crate::reconcile::DEFAULT_HALF_SIZE;

pub const EXCHANGE_ENV: &str = "PVT_EXCHANGE_DIR";
const DEFAULT_CRS: &str = "EPSG:25832";

pub(crate) fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is outside [0, 1]"));
    }
    Ok(v)
}

fn open_fraction(s: &str) -> Result<f64, String> {
    let v = probability(s)?;
    if v == 0.0 || v == 1.0 {
        return Err(format!("{v} must lie strictly between 0 and 1"));
    }
    Ok(v)
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("{v} must be positive"));
    }
    Ok(v)
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("{v} must be non-negative"));
    }
    Ok(v)
}

fn bbox(s: &str) -> Result<WorldBBox, String> {
    WorldBBox::parse(s).map_err(|e| e.to_string())
}

fn assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .filter(|(u, d)| !u.is_empty() && !d.is_empty())
        .map(|(u, d)| (u.to_string(), d.to_string()))
        .ok_or_else(|| format!("{s:?} is not annotator=dataset"))
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "pvtiles", version, about = "Aerial tile datasets, annotation, evaluation and register reconciliation")]
pub struct Cli {
    /// Where to write the run record (default: next to the main output).
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cut tiles from a georeferenced raster, on a grid or at manifest anchors.
    Tile(TileArgs),
    /// Build a labeled manifest from a register: positives on points, negatives elsewhere.
    Sample(SampleArgs),
    /// Stratified train/test split of a labeled manifest.
    Split(SplitArgs),
    /// Run the annotation HTTP service.
    ServeAnnotation(ServeArgs),
    /// Write consensus labels from the annotation log into a manifest.
    ExportLabels(ExportArgs),
    /// Store model-proposed labels in the annotation log.
    Preannotate(PreannotateArgs),
    /// Compute per-band statistics for every tile image of a manifest.
    Featurize(FeaturizeArgs),
    /// Train the linear baseline on manifest labels.
    Train(TrainArgs),
    /// Score tiles with the baseline or through the external exchange directory.
    Score(ScoreArgs),
    /// Classification report for predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Difference of two saved reports (second minus first).
    Compare(CompareArgs),
    /// Split true positives into register-confirmed and newly found.
    Reconcile(ReconcileArgs),
    /// Classification report from confusion counts.
    Report(ReportArgs),
    /// Download one map image for a bbox and write its world file.
    Fetch(FetchArgs),
    /// Re-run a command from its run record.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tile(_) => "tile",
            Command::Sample(_) => "sample",
            Command::Split(_) => "split",
            Command::ServeAnnotation(_) => "serve-annotation",
            Command::ExportLabels(_) => "export-labels",
            Command::Preannotate(_) => "preannotate",
            Command::Featurize(_) => "featurize",
            Command::Train(_) => "train",
            Command::Score(_) => "score",
            Command::Evaluate(_) => "evaluate",
            Command::Compare(_) => "compare",
            Command::Reconcile(_) => "reconcile",
            Command::Report(_) => "report",
            Command::Fetch(_) => "fetch",
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Sample(a) => Some(a.seed),
            Command::Split(a) => Some(a.seed),
            Command::Train(a) => Some(a.seed),
            _ => None,
        }
    }

    /// Main output path, used to place the run record.
    pub fn output(&self) -> Option<&PathBuf> {
        match self {
            Command::Tile(a) => Some(&a.out),
            Command::Sample(a) => Some(&a.out),
            Command::Split(a) => Some(&a.out),
            Command::ExportLabels(a) => Some(&a.out),
            Command::Preannotate(a) => Some(&a.log),
            Command::Featurize(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Score(a) => Some(&a.out),
            Command::Evaluate(a) => a.out.as_ref(),
            Command::Reconcile(a) => a.out.as_ref(),
            Command::Fetch(a) => Some(&a.out),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorArg {
    TopLeft,
    Center,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeArg {
    /// Fail on the first tile that leaves the raster.
    Error,
    /// Leave out tiles that leave the raster.
    Skip,
    /// Fill the missing part with zeros.
    PadZero,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Logistic,
    Hinge,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Logistic => ModelKind::Logistic,
            KindArg::Hinge => ModelKind::Hinge,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    Unanimous,
    Majority,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictArg {
    MarkUnknown,
    FlagForExpert,
}

#[derive(Debug, Args, Serialize)]
pub struct SpecArgs {
    /// Tile side in pixels.
    #[arg(long, default_value_t = 330)]
    pub size_px: u32,
    /// Ground resolution in meters per pixel.
    #[arg(long, value_parser = positive, default_value_t = 0.1)]
    pub resolution: f64,
    /// How point coordinates map to a tile.
    #[arg(long, value_enum, default_value_t = AnchorArg::Center)]
    pub anchor: AnchorArg,
    #[arg(long, default_value = DEFAULT_CRS)]
    pub crs: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TileArgs {
    /// PNG or PPM raster with a world file next to it.
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long, default_value = DEFAULT_CRS)]
    pub crs: String,
    #[arg(long, default_value_t = 330)]
    pub size_px: u32,
    /// Cut tiles at the anchors of this manifest instead of on a grid.
    #[arg(long, conflicts_with = "bbox")]
    pub manifest: Option<PathBuf>,
    /// Grid area (default: the raster extent).
    #[arg(long, value_parser = bbox, allow_hyphen_values = true)]
    pub bbox: Option<WorldBBox>,
    #[arg(long, value_enum, default_value_t = EdgeArg::Error)]
    pub edge: EdgeArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Register CSV: id,x,y[,attributes…].
    #[arg(long)]
    pub register: PathBuf,
    /// Area to sample from: minx,miny,maxx,maxy.
    #[arg(long, value_parser = bbox, allow_hyphen_values = true)]
    pub coverage: WorldBBox,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Number of negatives (default: one per positive).
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Negative footprints grown by this many meters must not contain a register point.
    #[arg(long, value_parser = non_negative, default_value_t = DEFAULT_EXCLUSION_RADIUS)]
    pub exclusion_radius: f64,
    /// Shift positive tiles randomly by up to a quarter footprint.
    #[arg(long)]
    pub jitter: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "dataset")]
    pub name: String,
    /// Output manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Training fraction; the rest goes to test.
    #[arg(long = "split", alias = "train", value_parser = open_fraction, default_value_t = 0.75)]
    pub train: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    /// Dataset manifests to serve; tile images resolve relative to each.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// annotator=dataset; without any, every dataset is open to everyone.
    #[arg(long = "assign", value_parser = assignment)]
    pub assignments: Vec<(String, String)>,
    /// Append-only annotation log, replayed at startup.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub min_annotators: usize,
    #[arg(long, value_enum, default_value_t = RuleArg::Majority)]
    pub rule: RuleArg,
    #[arg(long, value_enum, default_value_t = ConflictArg::MarkUnknown)]
    pub conflict_action: ConflictArg,
    /// Output manifest with consensus labels.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full export (labels, exclusions, flags) as JSON.
    #[arg(long)]
    pub details: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PreannotateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// tile_id,score file.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_parser = probability, default_value_t = DEFAULT_CLASSIFY_THRESHOLD)]
    pub threshold: f64,
    /// Annotation log to append to.
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long, default_value = DEFAULT_CRS)]
    pub crs: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Labels come from this manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    #[arg(long, value_enum, default_value_t = KindArg::Logistic)]
    pub kind: KindArg,
    /// Inverse regularization strength.
    #[arg(long, value_parser = positive, default_value_t = 100.0)]
    pub c: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long = "lr", value_parser = positive, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Baseline model file (native scoring).
    #[arg(long, required_unless_present = "external", conflicts_with = "external")]
    pub model: Option<PathBuf>,
    /// Precomputed features (default: computed from the tile images).
    #[arg(long, requires = "model")]
    pub features: Option<PathBuf>,
    /// Score through the exchange directory instead of the baseline.
    #[arg(long)]
    pub external: bool,
    #[arg(long, env = EXCHANGE_ENV)]
    pub exchange_dir: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_CRS)]
    pub crs: String,
    /// tile_id,score output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// tile_id,score or tile_id,label predictions.
    #[arg(long, required_unless_present = "detections", conflicts_with = "detections")]
    pub pred: Option<PathBuf>,
    /// Detection boxes (tile_id,x,y,w,h,confidence); tiles without rows count as empty.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// tile_id,label file or a manifest.
    #[arg(long)]
    pub truth: PathBuf,
    /// Records of a manifest truth to use.
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long, value_parser = probability, default_value_t = DEFAULT_CLASSIFY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_parser = probability, default_value_t = DEFAULT_DETECTION_THRESHOLD)]
    pub det_threshold: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Save the report as JSON for `compare`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct ReconcileArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// tile_id,label file or a manifest.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long, value_parser = probability, default_value_t = DEFAULT_CLASSIFY_THRESHOLD)]
    pub threshold: f64,
    /// Precomputed tile_id,matched flags.
    #[arg(long, conflicts_with_all = ["register", "polygons"])]
    pub flags: Option<PathBuf>,
    /// Manifest giving tile footprints (geometry mode).
    #[arg(long, required_unless_present = "flags")]
    pub manifest: Option<PathBuf>,
    /// Register points, promoted to squares of `2·half-size` meters.
    #[arg(long, conflicts_with = "polygons")]
    pub register: Option<PathBuf>,
    /// Register polygons: id,minx,miny,maxx,maxy,source_point_id.
    #[arg(long)]
    pub polygons: Option<PathBuf>,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_HALF_SIZE)]
    pub half_size: f64,
    /// CRS of the register; must match the manifest.
    #[arg(long)]
    pub register_crs: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the ids of newly found true positives here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub tp: u64,
    #[arg(long)]
    pub fp: u64,
    #[arg(long)]
    pub tn: u64,
    #[arg(long = "fn")]
    pub fn_: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct FetchArgs {
    /// URL template with {bbox}, {w}, {h} and optionally {crs}.
    #[arg(long)]
    pub template: String,
    #[arg(long, value_parser = bbox, allow_hyphen_values = true)]
    pub bbox: WorldBBox,
    #[arg(long, value_parser = positive, default_value_t = 0.1)]
    pub resolution: f64,
    #[arg(long, default_value = DEFAULT_CRS)]
    pub crs: String,
    /// Print the request without sending it.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// A `.run.json` record.
    pub run: PathBuf,
}
