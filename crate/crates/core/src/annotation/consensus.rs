use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{AnnotationError, Label, LabelRecord, Origin};
use crate::dataset::{DatasetManifest, TileLabel};
use crate::metrics::BinaryLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusRule {
    Unanimous,
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictAction {
    MarkUnknown,
    FlagForExpert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusPolicy {
    pub min_annotators: usize,
    pub rule: ConsensusRule,
    pub conflict_action: ConflictAction,
}

impl Default for ConsensusPolicy {
    fn default() -> Self {
        ConsensusPolicy {
            min_annotators: 1,
            rule: ConsensusRule::Majority,
            conflict_action: ConflictAction::MarkUnknown,
        }
    }
}

impl ConsensusPolicy {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        if self.min_annotators == 0 {
            return Err(AnnotationError::InvalidPolicy("min_annotators must be at least 1".into()));
        }
        Ok(())
    }
}

/// Share of the most frequent label among human records, and that label.
/// A tie for the top count yields `Unknown`.
pub fn agreement(tile_id: &str, records: &[LabelRecord]) -> Result<(f64, Label), AnnotationError> {
    let mut counts = [0usize; 3];
    for r in records.iter().filter(|r| r.origin == Origin::Human) {
        counts[r.label as usize] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(AnnotationError::NoHumanRecords(tile_id.to_string()));
    }
    let top = *counts.iter().max().unwrap();
    let winners: Vec<Label> = Label::ALL.into_iter().filter(|l| counts[*l as usize] == top).collect();
    let modal = if winners.len() == 1 { winners[0] } else { Label::Unknown };
    Ok((top as f64 / n as f64, modal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Annotators agreed on "unknown".
    UnknownConsensus,
    /// The rule was not met and the policy marks such tiles unknown.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub tile_id: String,
    pub reason: ExclusionReason,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insufficient {
    pub tile_id: String,
    pub found: usize,
    pub required: usize,
}

/// Outcome for every tile, each list sorted by tile id. `labels` never holds
/// an unknown.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsensusExport {
    pub labels: BTreeMap<String, BinaryLabel>,
    pub excluded: Vec<Exclusion>,
    pub flagged: Vec<Exclusion>,
    pub insufficient: Vec<Insufficient>,
}

impl ConsensusExport {
    /// Writes consensus labels into `manifest`. Excluded tiles become
    /// `unknown`, flagged tiles `unlabeled`; under-annotated tiles keep
    /// their label.
    pub fn apply(&self, manifest: &mut DatasetManifest) {
        let mut updates: HashMap<&str, TileLabel> = HashMap::new();
        for (id, l) in &self.labels {
            updates.insert(id, match l {
                BinaryLabel::Positive => TileLabel::Positive,
                BinaryLabel::Negative => TileLabel::Negative,
            });
        }
        for e in &self.excluded {
            updates.insert(&e.tile_id, TileLabel::Unknown);
        }
        for e in &self.flagged {
            updates.insert(&e.tile_id, TileLabel::Unlabeled);
        }
        for r in &mut manifest.records {
            if let Some(l) = updates.get(r.tile_id.as_str()) {
                r.label = *l;
            }
        }
    }
}

/// Applies `policy` to the current records of every tile in `tile_ids`.
/// Records are expected to hold one current label per annotator.
pub fn export_consensus(
    tile_ids: &[&str],
    records: &HashMap<String, Vec<LabelRecord>>,
    policy: &ConsensusPolicy,
) -> Result<ConsensusExport, AnnotationError> {
    policy.validate()?;
    let mut ids: Vec<&str> = tile_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut out = ConsensusExport::default();
    for id in ids {
        let recs = records.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let found = recs.iter().filter(|r| r.origin == Origin::Human).count();
        if found < policy.min_annotators || found == 0 {
            out.insufficient.push(Insufficient {
                tile_id: id.to_string(),
                found,
                required: policy.min_annotators,
            });
            continue;
        }
        let (score, modal) = agreement(id, recs)?;
        let met = match policy.rule {
            ConsensusRule::Unanimous => score == 1.0,
            ConsensusRule::Majority => score > 0.5,
        };
        let entry = |reason| Exclusion {
            tile_id: id.to_string(),
            reason,
            agreement: score,
        };
        match (met, modal) {
            (true, Label::Positive) => {
                out.labels.insert(id.to_string(), BinaryLabel::Positive);
            }
            (true, Label::Negative) => {
                out.labels.insert(id.to_string(), BinaryLabel::Negative);
            }
            (true, Label::Unknown) => out.excluded.push(entry(ExclusionReason::UnknownConsensus)),
            (false, _) => match policy.conflict_action {
                ConflictAction::MarkUnknown => out.excluded.push(entry(ExclusionReason::Conflict)),
                ConflictAction::FlagForExpert => out.flagged.push(entry(ExclusionReason::Conflict)),
            },
        }
    }
    Ok(out)
}
