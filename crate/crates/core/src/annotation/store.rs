use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{
    export_consensus, page, store_boxes, AnnotationError, AnnotationPage, BoxAnnotation, BoxConvention,
    ConsensusExport, ConsensusPolicy, Label, LabelRecord, Origin, PixelBox, PREANNOTATION_ANNOTATOR,
};
use crate::dataset::DatasetManifest;

/// One line of the append-only annotation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub timestamp_ms: u64,
    pub dataset: String,
    pub annotator_id: String,
    pub tile_id: String,
    pub origin: Origin,
    #[serde(flatten)]
    pub payload: LogPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogPayload {
    Label { label: Label },
    /// Boxes as stored (top-left), with the convention they arrived in.
    Boxes { convention: BoxConvention, boxes: Vec<PixelBox> },
}

/// Reads every entry of a log file in order.
pub fn replay(path: &Path) -> Result<Vec<LogEntry>, AnnotationError> {
    let f = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: LogEntry = serde_json::from_str(&line).map_err(|e| AnnotationError::Log {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(e);
    }
    Ok(out)
}

/// A tile as shown to one annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileView {
    pub tile_id: String,
    pub image_url: String,
    pub label: Option<Label>,
    pub origin: Option<Origin>,
}

type Cells<T> = HashMap<String, HashMap<String, T>>;

struct DatasetEntry {
    manifest: DatasetManifest,
    image_root: PathBuf,
    labels: RwLock<Cells<LabelRecord>>,
    boxes: RwLock<Cells<BoxAnnotation>>,
}

impl DatasetEntry {
    fn check_tile(&self, tile_id: &str) -> Result<(), AnnotationError> {
        if self.manifest.get(tile_id).is_none() {
            return Err(AnnotationError::UnknownTile {
                dataset: self.manifest.name.clone(),
                tile_id: tile_id.to_string(),
            });
        }
        Ok(())
    }

    fn tile_ids(&self) -> Vec<&str> {
        self.manifest.records.iter().map(|r| r.tile_id.as_str()).collect()
    }
}

/// Label and box state for a set of datasets. One cell per (tile, annotator);
/// a new write replaces the cell. Writes are appended to the log (if any)
/// while the cell lock is held, so log order matches state order.
pub struct AnnotationStore {
    datasets: HashMap<String, DatasetEntry>,
    assignments: HashMap<String, BTreeSet<String>>,
    log: Option<Mutex<File>>,
}

impl Default for AnnotationStore {
    fn default() -> Self {
        Self::new()
    }
}

fn validate_annotator(id: &str) -> Result<(), AnnotationError> {
    if id.trim().is_empty() || id == PREANNOTATION_ANNOTATOR {
        return Err(AnnotationError::InvalidAnnotator(id.to_string()));
    }
    Ok(())
}

impl AnnotationStore {
    pub fn new() -> Self {
        AnnotationStore {
            datasets: HashMap::new(),
            assignments: HashMap::new(),
            log: None,
        }
    }

    /// `image_root` is the directory tile `image_ref`s are relative to.
    pub fn add_dataset(&mut self, manifest: DatasetManifest, image_root: impl Into<PathBuf>) {
        self.datasets.insert(
            manifest.name.clone(),
            DatasetEntry {
                manifest,
                image_root: image_root.into(),
                labels: RwLock::new(HashMap::new()),
                boxes: RwLock::new(HashMap::new()),
            },
        );
    }

    pub fn assign(&mut self, annotator: &str, dataset: &str) -> Result<(), AnnotationError> {
        validate_annotator(annotator)?;
        self.entry(dataset)?;
        self.assignments
            .entry(annotator.to_string())
            .or_default()
            .insert(dataset.to_string());
        Ok(())
    }

    /// Replays `path` if it exists, then appends all further writes to it.
    pub fn open_log(&mut self, path: &Path) -> Result<usize, AnnotationError> {
        let mut n = 0;
        if path.exists() {
            let entries = replay(path)?;
            n = entries.len();
            for e in entries {
                self.apply_entry(e)?;
            }
        }
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        self.log = Some(Mutex::new(f));
        Ok(n)
    }

    /// Applies a logged entry as-is, without writing it to the log.
    pub fn apply_entry(&self, e: LogEntry) -> Result<(), AnnotationError> {
        let ds = self.entry(&e.dataset)?;
        ds.check_tile(&e.tile_id)?;
        match e.payload {
            LogPayload::Label { label } => {
                let rec = LabelRecord {
                    tile_id: e.tile_id.clone(),
                    annotator_id: e.annotator_id.clone(),
                    label,
                    origin: e.origin,
                    timestamp_ms: e.timestamp_ms,
                };
                ds.labels.write().entry(e.tile_id).or_default().insert(e.annotator_id, rec);
            }
            LogPayload::Boxes { convention, boxes } => {
                let b = BoxAnnotation {
                    tile_id: e.tile_id.clone(),
                    annotator_id: e.annotator_id.clone(),
                    convention,
                    boxes,
                };
                ds.boxes.write().entry(e.tile_id).or_default().insert(e.annotator_id, b);
            }
        }
        Ok(())
    }

    fn append(&self, e: &LogEntry) -> Result<(), AnnotationError> {
        if let Some(log) = &self.log {
            let mut line = serde_json::to_string(e).expect("log entry serializes");
            line.push('\n');
            let mut f = log.lock();
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }

    fn entry(&self, dataset: &str) -> Result<&DatasetEntry, AnnotationError> {
        self.datasets
            .get(dataset)
            .ok_or_else(|| AnnotationError::UnknownDataset(dataset.to_string()))
    }

    pub fn manifest(&self, dataset: &str) -> Result<&DatasetManifest, AnnotationError> {
        Ok(&self.entry(dataset)?.manifest)
    }

    /// Datasets the annotator may work on. With no assignments configured,
    /// every dataset is open to every annotator.
    pub fn datasets_for(&self, annotator: &str) -> Vec<String> {
        if self.assignments.is_empty() {
            let mut all: Vec<String> = self.datasets.keys().cloned().collect();
            all.sort();
            return all;
        }
        self.assignments
            .get(annotator)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    fn check_assigned(&self, annotator: &str, dataset: &str) -> Result<&DatasetEntry, AnnotationError> {
        validate_annotator(annotator)?;
        let ds = self.entry(dataset)?;
        if !self.datasets_for(annotator).iter().any(|d| d == dataset) {
            return Err(AnnotationError::NotAssigned {
                dataset: dataset.to_string(),
                annotator: annotator.to_string(),
            });
        }
        Ok(ds)
    }

    /// Records a human label, replacing the annotator's previous one.
    pub fn set_label(
        &self,
        dataset: &str,
        annotator: &str,
        tile_id: &str,
        label: Label,
        timestamp_ms: u64,
    ) -> Result<LabelRecord, AnnotationError> {
        let ds = self.check_assigned(annotator, dataset)?;
        ds.check_tile(tile_id)?;
        let rec = LabelRecord {
            tile_id: tile_id.to_string(),
            annotator_id: annotator.to_string(),
            label,
            origin: Origin::Human,
            timestamp_ms,
        };
        let mut cells = ds.labels.write();
        self.append(&LogEntry {
            timestamp_ms,
            dataset: dataset.to_string(),
            annotator_id: annotator.to_string(),
            tile_id: tile_id.to_string(),
            origin: Origin::Human,
            payload: LogPayload::Label { label },
        })?;
        cells
            .entry(tile_id.to_string())
            .or_default()
            .insert(annotator.to_string(), rec.clone());
        Ok(rec)
    }

    /// Stores machine-proposed labels under the reserved annotator id.
    pub fn apply_preannotation(&self, dataset: &str, records: &[LabelRecord]) -> Result<usize, AnnotationError> {
        let ds = self.entry(dataset)?;
        for r in records {
            ds.check_tile(&r.tile_id)?;
        }
        let mut cells = ds.labels.write();
        for r in records {
            let r = LabelRecord {
                annotator_id: PREANNOTATION_ANNOTATOR.to_string(),
                origin: Origin::Preannotation,
                ..r.clone()
            };
            self.append(&LogEntry {
                timestamp_ms: r.timestamp_ms,
                dataset: dataset.to_string(),
                annotator_id: r.annotator_id.clone(),
                tile_id: r.tile_id.clone(),
                origin: r.origin,
                payload: LogPayload::Label { label: r.label },
            })?;
            cells.entry(r.tile_id.clone()).or_default().insert(r.annotator_id.clone(), r);
        }
        Ok(records.len())
    }

    /// Current records per tile, each list sorted by annotator id.
    pub fn records(&self, dataset: &str) -> Result<HashMap<String, Vec<LabelRecord>>, AnnotationError> {
        let ds = self.entry(dataset)?;
        let cells = ds.labels.read();
        Ok(cells
            .iter()
            .map(|(tile, by)| {
                let mut v: Vec<LabelRecord> = by.values().cloned().collect();
                v.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
                (tile.clone(), v)
            })
            .collect())
    }

    pub fn page_view(
        &self,
        dataset: &str,
        annotator: &str,
        page_index: usize,
        page_size: usize,
    ) -> Result<(AnnotationPage, Vec<TileView>), AnnotationError> {
        let ds = self.check_assigned(annotator, dataset)?;
        let p = page(dataset, &ds.tile_ids(), page_index, page_size)?;
        let cells = ds.labels.read();
        let views = p
            .tile_ids
            .iter()
            .map(|id| {
                let by = cells.get(id);
                let current = by
                    .and_then(|m| m.get(annotator))
                    .or_else(|| by.and_then(|m| m.get(PREANNOTATION_ANNOTATOR)));
                TileView {
                    tile_id: id.clone(),
                    image_url: format!("/datasets/{dataset}/tiles/{id}/image"),
                    label: current.map(|r| r.label),
                    origin: current.map(|r| r.origin),
                }
            })
            .collect();
        Ok((p, views))
    }

    pub fn export(&self, dataset: &str, policy: &ConsensusPolicy) -> Result<ConsensusExport, AnnotationError> {
        let ds = self.entry(dataset)?;
        export_consensus(&ds.tile_ids(), &self.records(dataset)?, policy)
    }

    pub fn put_boxes(
        &self,
        dataset: &str,
        annotator: &str,
        tile_id: &str,
        boxes: &[PixelBox],
        convention: BoxConvention,
        timestamp_ms: u64,
    ) -> Result<BoxAnnotation, AnnotationError> {
        let ds = self.check_assigned(annotator, dataset)?;
        ds.check_tile(tile_id)?;
        let size = ds.manifest.spec.size_px;
        let ann = store_boxes(tile_id, annotator, boxes, convention, (size, size))?;
        let mut cells = ds.boxes.write();
        self.append(&LogEntry {
            timestamp_ms,
            dataset: dataset.to_string(),
            annotator_id: annotator.to_string(),
            tile_id: tile_id.to_string(),
            origin: Origin::Human,
            payload: LogPayload::Boxes {
                convention,
                boxes: ann.boxes.clone(),
            },
        })?;
        cells
            .entry(tile_id.to_string())
            .or_default()
            .insert(annotator.to_string(), ann.clone());
        Ok(ann)
    }

    /// Box annotations for a tile, sorted by annotator id.
    pub fn boxes(&self, dataset: &str, tile_id: &str) -> Result<Vec<BoxAnnotation>, AnnotationError> {
        let ds = self.entry(dataset)?;
        ds.check_tile(tile_id)?;
        let mut v: Vec<BoxAnnotation> = ds
            .boxes
            .read()
            .get(tile_id)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default();
        v.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
        Ok(v)
    }

    pub fn image_path(&self, dataset: &str, tile_id: &str) -> Result<PathBuf, AnnotationError> {
        let ds = self.entry(dataset)?;
        let rec = ds.manifest.get(tile_id).ok_or_else(|| AnnotationError::UnknownTile {
            dataset: dataset.to_string(),
            tile_id: tile_id.to_string(),
        })?;
        Ok(ds.image_root.join(&rec.image_ref))
    }
}
