use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, DatasetManifest, Split, TileLabel};

/// Train/test proportions; `train + test = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    train: f64,
}

impl SplitFractions {
    pub fn new(train: f64, test: f64) -> Result<Self, DatasetError> {
        if ((train + test) - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidFractions(format!(
                "train {train} + test {test} must equal 1"
            )));
        }
        Self::from_train(train)
    }

    pub fn from_train(train: f64) -> Result<Self, DatasetError> {
        if !(train > 0.0 && train < 1.0) {
            return Err(DatasetError::InvalidFractions(format!(
                "train fraction must lie in (0, 1), got {train}"
            )));
        }
        Ok(SplitFractions { train })
    }

    pub fn train(&self) -> f64 {
        self.train
    }

    pub fn test(&self) -> f64 {
        1.0 - self.train
    }
}

/// Train counts per class by largest-remainder rounding of `n_c · train`.
///
/// The total is `round(N · train)`; each class gets its floor plus at most
/// one of the leftover seats, handed out by descending fractional part
/// (ties go to the earlier class).
fn allocate(class_sizes: &[usize], train: f64) -> Vec<usize> {
    let total: usize = class_sizes.iter().sum();
    let target = (total as f64 * train).round() as usize;
    let exact: Vec<f64> = class_sizes.iter().map(|&n| n as f64 * train).collect();
    let mut seats: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (exact[i] - exact[i].floor(), exact[j] - exact[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    let mut left = target.saturating_sub(seats.iter().sum());
    for i in order {
        if left == 0 {
            break;
        }
        if seats[i] < class_sizes[i] {
            seats[i] += 1;
            left -= 1;
        }
    }
    seats
}

/// Assigns every record to train or test, preserving each class's share.
///
/// Record order is kept; only the `split` field changes. Which records of a
/// class go to train is decided by a shuffle keyed on `seed`.
pub fn stratified_split(
    manifest: &DatasetManifest,
    fractions: SplitFractions,
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    if let Some(r) = manifest.records.iter().find(|r| !r.label.is_binary()) {
        return Err(DatasetError::UnlabeledRecord {
            tile_id: r.tile_id.clone(),
        });
    }
    let classes = [TileLabel::Positive, TileLabel::Negative];
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| {
            manifest
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.label == *c)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let seats = allocate(&sizes, fractions.train());

    let mut out = manifest.clone();
    out.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (mut idx, n_train) in members.into_iter().zip(seats) {
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            out.records[i].split = if k < n_train { Split::Train } else { Split::Test };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TileRecord;
    use crate::raster_geo::{TileAnchor, TileSpec};

    fn manifest(pos: usize, neg: usize) -> DatasetManifest {
        let spec = TileSpec::new(200, 0.1, TileAnchor::TopLeft).unwrap();
        let mut m = DatasetManifest::new("t", spec, "c", 0);
        for i in 0..pos {
            m.records.push(TileRecord::new(format!("p{i}"), (0.0, 0.0), TileLabel::Positive));
        }
        for i in 0..neg {
            m.records.push(TileRecord::new(format!("n{i}"), (0.0, 0.0), TileLabel::Negative));
        }
        m
    }

    fn count(m: &DatasetManifest, label: TileLabel, split: Split) -> usize {
        m.records.iter().filter(|r| r.label == label && r.split == split).count()
    }

    #[test]
    fn exact_halves() {
        let m = stratified_split(&manifest(2, 2), SplitFractions::new(0.5, 0.5).unwrap(), 3).unwrap();
        for l in [TileLabel::Positive, TileLabel::Negative] {
            assert_eq!(count(&m, l, Split::Train), 1);
            assert_eq!(count(&m, l, Split::Test), 1);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let base = manifest(37, 91);
        let f = SplitFractions::from_train(0.75).unwrap();
        let a = stratified_split(&base, f, 11).unwrap();
        assert_eq!(a, stratified_split(&base, f, 11).unwrap());
        assert_ne!(a, stratified_split(&base, f, 12).unwrap());
    }

    #[test]
    fn unlabeled_is_rejected() {
        let mut m = manifest(2, 2);
        m.records[1].label = TileLabel::Unknown;
        let err = stratified_split(&m, SplitFractions::from_train(0.75).unwrap(), 0).unwrap_err();
        assert!(matches!(err, DatasetError::UnlabeledRecord { tile_id } if tile_id == "p1"));
    }

    #[test]
    fn fractions_validated() {
        assert!(SplitFractions::new(0.75, 0.3).is_err());
        assert!(SplitFractions::from_train(1.0).is_err());
        assert!(SplitFractions::from_train(0.0).is_err());
        assert!((SplitFractions::new(0.75, 0.25).unwrap().test() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn largest_remainder_allocation() {
        // 5·0.75 = 3.75 and 6·0.75 = 4.5, total round(8.25) = 8
        assert_eq!(allocate(&[5, 6], 0.75), vec![4, 4]);
        assert_eq!(allocate(&[0, 4], 0.75), vec![0, 3]);
        assert_eq!(allocate(&[1, 1], 0.5), vec![1, 0]);
    }
}
