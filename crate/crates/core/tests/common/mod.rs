#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pvtiles::annotation::{ConflictAction, ConsensusExport, ConsensusPolicy, ConsensusRule};
use pvtiles::metrics::BinaryLabel;
use pvtiles::raster_geo::{tile_grid, TileAnchor, TileSpec, WorldBBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A published two-class report: per-class (precision, recall, f1, support),
/// accuracy, and (precision, recall, f1) for the macro and weighted rows.
#[derive(Debug, Clone, Copy)]
pub struct PublishedTable {
    pub name: &'static str,
    pub negative: (f64, f64, f64, u64),
    pub positive: (f64, f64, f64, u64),
    pub accuracy: f64,
    pub macro_avg: (f64, f64, f64),
    pub weighted_avg: (f64, f64, f64),
}

const fn t(
    name: &'static str,
    negative: (f64, f64, f64, u64),
    positive: (f64, f64, f64, u64),
    accuracy: f64,
    macro_avg: (f64, f64, f64),
    weighted_avg: (f64, f64, f64),
) -> PublishedTable {
    PublishedTable { name, negative, positive, accuracy, macro_avg, weighted_avg }
}

pub const PUBLISHED: &[PublishedTable] = &[
    t("vgg16-features-lr", (0.86, 0.90, 0.88, 2495), (0.73, 0.67, 0.70, 1056), 0.83, (0.80, 0.78, 0.79), (0.82, 0.83, 0.83)),
    t("vgg16-features-linear-svm", (0.86, 0.89, 0.87, 2495), (0.71, 0.65, 0.68, 1056), 0.82, (0.79, 0.77, 0.78), (0.81, 0.82, 0.82)),
    t("vgg16-block4-lr", (0.86, 0.89, 0.87, 2495), (0.72, 0.65, 0.68, 1056), 0.82, (0.79, 0.77, 0.78), (0.82, 0.82, 0.82)),
    t("vgg16-block4-svm", (0.86, 0.89, 0.87, 2495), (0.72, 0.65, 0.68, 1056), 0.82, (0.79, 0.77, 0.78), (0.82, 0.82, 0.82)),
    t("xception-gap-lr", (0.86, 0.69, 0.77, 2495), (0.50, 0.73, 0.59, 1056), 0.70, (0.68, 0.71, 0.68), (0.75, 0.70, 0.71)),
    t("xception-gap-svm", (0.89, 0.39, 0.54, 2495), (0.38, 0.89, 0.53, 1056), 0.54, (0.64, 0.64, 0.54), (0.74, 0.54, 0.54)),
    t("xception-last-lr", (0.81, 0.76, 0.78, 2495), (0.50, 0.58, 0.54, 1056), 0.71, (0.66, 0.67, 0.66), (0.72, 0.71, 0.71)),
    t("xception-last-svm", (0.78, 0.77, 0.78, 2495), (0.47, 0.49, 0.48, 1056), 0.69, (0.63, 0.63, 0.63), (0.69, 0.69, 0.69)),
    t("vgg16-nrw-test", (0.87, 0.63, 0.73, 1040), (0.71, 0.91, 0.80, 1062), 0.77, (0.79, 0.77, 0.76), (0.79, 0.77, 0.76)),
    t("vgg16-nrw-validation", (0.61, 0.29, 0.39, 189), (0.86, 0.96, 0.91, 876), 0.84, (0.74, 0.62, 0.65), (0.82, 0.84, 0.82)),
    t("inception-resnet-nrw-test", (0.88, 0.93, 0.90, 1040), (0.92, 0.88, 0.90, 1062), 0.90, (0.90, 0.90, 0.90), (0.90, 0.90, 0.90)),
    t("inception-resnet-nrw-validation", (0.61, 0.40, 0.48, 189), (0.88, 0.94, 0.91, 876), 0.85, (0.74, 0.67, 0.70), (0.83, 0.85, 0.84)),
    t("autoencoder-nrw-test", (0.88, 0.47, 0.61, 1040), (0.64, 0.94, 0.76, 1062), 0.71, (0.76, 0.70, 0.69), (0.76, 0.71, 0.69)),
    t("autoencoder-nrw-validation", (0.37, 0.10, 0.15, 189), (0.83, 0.96, 0.89, 876), 0.81, (0.60, 0.53, 0.52), (0.75, 0.81, 0.76)),
    t("mask-rcnn-balanced", (0.88, 0.93, 0.90, 1040), (0.92, 0.88, 0.90, 1062), 0.90, (0.90, 0.90, 0.90), (0.90, 0.90, 0.90)),
    t("mask-rcnn-imbalanced", (0.71, 0.89, 0.79, 189), (0.98, 0.92, 0.95, 876), 0.92, (0.84, 0.91, 0.87), (0.93, 0.92, 0.92)),
    t("vgg16-sigmoid-test", (0.98, 0.93, 0.96, 2473), (0.85, 0.96, 0.90, 1047), 0.94, (0.92, 0.95, 0.93), (0.94, 0.94, 0.94)),
    t("vgg16-sigmoid-validation", (1.00, 0.92, 0.96, 11384), (0.68, 0.98, 0.81, 1968), 0.93, (0.84, 0.95, 0.88), (0.95, 0.93, 0.93)),
    t("vgg16-softmax-test", (0.96, 0.97, 0.97, 2471), (0.94, 0.91, 0.92, 1049), 0.96, (0.95, 0.94, 0.95), (0.96, 0.96, 0.96)),
    t("vgg16-softmax-validation", (0.99, 0.97, 0.98, 11384), (0.85, 0.96, 0.90, 1968), 0.97, (0.92, 0.96, 0.94), (0.97, 0.97, 0.97)),
    t("mask-rcnn-bonn-dueren", (0.99, 0.87, 0.93, 9792), (0.10, 0.66, 0.17, 209), 0.86, (0.54, 0.76, 0.55), (0.97, 0.86, 0.91)),
    t("inception-v2-bonn-dueren", (0.99, 0.83, 0.90, 9792), (0.07, 0.62, 0.13, 209), 0.82, (0.54, 0.73, 0.52), (0.97, 0.82, 0.89)),
    t("mask-rcnn-heerlen-transfer", (0.93, 0.59, 0.72, 15991), (0.39, 0.86, 0.54, 4913), 0.66, (0.66, 0.73, 0.63), (0.81, 0.66, 0.68)),
    t("inception-resnet-heerlen-transfer", (0.95, 0.58, 0.72, 15991), (0.40, 0.90, 0.55, 4913), 0.66, (0.67, 0.74, 0.64), (0.82, 0.66, 0.68)),
    t("combined-heerlen-transfer", (0.98, 0.42, 0.58, 15991), (0.34, 0.97, 0.50, 4913), 0.55, (0.66, 0.69, 0.54), (0.83, 0.55, 0.56)),
    t("softmax-heerlen-to-nrw", (1.00, 0.96, 0.98, 9828), (0.15, 0.69, 0.25, 107), 0.96, (0.58, 0.83, 0.61), (0.99, 0.96, 0.97)),
];

/// Metrics recomputed from explicit per-sample label vectors, independent of
/// the library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub rows: [OracleRow; 2],
    pub accuracy: f64,
    pub macro_avg: (f64, f64, f64),
    pub weighted_avg: (f64, f64, f64),
}

/// Builds y_true / y_pred sample lists for the four cells and counts them.
pub fn oracle_report(tp: u64, fp: u64, tn: u64, fn_: u64) -> OracleReport {
    let mut samples: Vec<(u8, u8)> = Vec::new();
    samples.extend(std::iter::repeat_n((1, 1), tp as usize));
    samples.extend(std::iter::repeat_n((0, 1), fp as usize));
    samples.extend(std::iter::repeat_n((0, 0), tn as usize));
    samples.extend(std::iter::repeat_n((1, 0), fn_ as usize));
    let n = samples.len() as u64;
    let row = |c: u8| {
        let correct = samples.iter().filter(|(t, p)| *t == c && *p == c).count() as u64;
        let predicted = samples.iter().filter(|(_, p)| *p == c).count() as u64;
        let actual = samples.iter().filter(|(t, _)| *t == c).count() as u64;
        let precision = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { correct as f64 / actual as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        OracleRow {
            precision,
            recall,
            f1,
            support: actual,
            precision_undefined: predicted == 0,
            recall_undefined: actual == 0,
        }
    };
    let rows = [row(0), row(1)];
    let agree = samples.iter().filter(|(t, p)| t == p).count() as u64;
    let w = |f: fn(&OracleRow) -> f64| (f(&rows[0]) * rows[0].support as f64 + f(&rows[1]) * rows[1].support as f64) / n as f64;
    OracleReport {
        rows,
        accuracy: agree as f64 / n as f64,
        macro_avg: (
            (rows[0].precision + rows[1].precision) / 2.0,
            (rows[0].recall + rows[1].recall) / 2.0,
            (rows[0].f1 + rows[1].f1) / 2.0,
        ),
        weighted_avg: (w(|r| r.precision), w(|r| r.recall), w(|r| r.f1)),
    }
}

/// Decimal rounding to two places, half away from zero, done on the decimal
/// string so binary representation error cannot flip a midpoint.
pub fn round2_decimal(x: f64) -> f64 {
    let s = format!("{:.12}", x.abs());
    let (int, frac) = s.split_once('.').unwrap();
    let mut cents: i64 = int.parse::<i64>().unwrap() * 100 + frac[..2].parse::<i64>().unwrap();
    if frac.as_bytes()[2] >= b'5' {
        cents += 1;
    }
    (cents as f64 / 100.0).copysign(x)
}

/// A synthetic orthophoto: green background with noise and dark-blue panel
/// rectangles. Coordinates are meters in a local projected CRS.
pub struct Scene {
    pub left: f64,
    pub top: f64,
    pub resolution: f64,
    pub width_px: u32,
    pub height_px: u32,
    /// Panel centers; each panel is `panel_size` meters.
    pub panels: Vec<(f64, f64)>,
    pub panel_size: (f64, f64),
}

impl Scene {
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.left,
            self.top - f64::from(self.height_px) * self.resolution,
            self.left + f64::from(self.width_px) * self.resolution,
            self.top,
        )
    }

    /// Random panels kept at least `spacing` meters apart and `margin`
    /// meters from the border.
    pub fn random(seed: u64, side_m: f64, resolution: f64, n_panels: usize, spacing: f64, margin: f64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (left, top) = (350_000.0, 5_620_000.0);
        let mut panels: Vec<(f64, f64)> = Vec::new();
        let mut tries = 0;
        while panels.len() < n_panels && tries < 100_000 {
            tries += 1;
            let x = left + rng.gen_range(margin..side_m - margin);
            let y = top - rng.gen_range(margin..side_m - margin);
            if panels.iter().all(|(px, py)| (px - x).abs() > spacing || (py - y).abs() > spacing) {
                panels.push((x, y));
            }
        }
        let px = (side_m / resolution).round() as u32;
        Scene { left, top, resolution, width_px: px, height_px: px, panels, panel_size: (8.0, 6.0) }
    }

    pub fn panel_at(&self, x: f64, y: f64) -> bool {
        let (hw, hh) = (self.panel_size.0 / 2.0, self.panel_size.1 / 2.0);
        self.panels.iter().any(|(px, py)| (x - px).abs() <= hw && (y - py).abs() <= hh)
    }

    /// Does any panel overlap the tile with top-left `anchor` and side `side`?
    pub fn tile_has_panel(&self, anchor: (f64, f64), side: f64) -> bool {
        let (hw, hh) = (self.panel_size.0 / 2.0, self.panel_size.1 / 2.0);
        self.panels.iter().any(|(px, py)| {
            px + hw > anchor.0 && px - hw < anchor.0 + side && py + hh > anchor.1 - side && py - hh < anchor.1
        })
    }

    /// Interleaved RGB bytes, row-major from the top-left.
    pub fn render(&self, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (self.width_px as usize, self.height_px as usize);
        let mut data = vec![0u8; w * h * 3];
        for row in 0..h {
            for col in 0..w {
                let i = (row * w + col) * 3;
                let n: i16 = rng.gen_range(-12..=12);
                let px = [(70 + n) as u8, (120 + n) as u8, (60 + n / 2) as u8];
                data[i..i + 3].copy_from_slice(&px);
            }
        }
        let (hw, hh) = (self.panel_size.0 / 2.0, self.panel_size.1 / 2.0);
        for (x, y) in &self.panels {
            let c0 = ((x - hw - self.left) / self.resolution).floor().max(0.0) as usize;
            let c1 = (((x + hw - self.left) / self.resolution).ceil() as usize).min(w);
            let r0 = ((self.top - (y + hh)) / self.resolution).floor().max(0.0) as usize;
            let r1 = (((self.top - (y - hh)) / self.resolution).ceil() as usize).min(h);
            for row in r0..r1 {
                for col in c0..c1 {
                    let i = (row * w + col) * 3;
                    data[i..i + 3].copy_from_slice(&[25, 35, 95]);
                }
            }
        }
        data
    }
}

/// Writes a binary PPM and its `.pmw` world file.
pub fn write_scene_ppm(scene: &Scene, path: &Path, seed: u64) {
    let mut bytes = format!("P6\n{} {}\n255\n", scene.width_px, scene.height_px).into_bytes();
    bytes.extend(scene.render(seed));
    std::fs::write(path, bytes).unwrap();
    let r = scene.resolution;
    let wf = format!(
        "{r}\n0\n0\n{}\n{}\n{}\n",
        -r,
        scene.left + r / 2.0,
        scene.top - r / 2.0
    );
    std::fs::write(path.with_extension("pmw"), wf).unwrap();
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_pvtiles"))
}

/// Runs the CLI in `dir`.
pub fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().unwrap()
}

pub fn cli_ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(
        out.status.success(),
        "pvtiles {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Files produced by [`run_pipeline`].
pub struct Pipeline {
    pub root: PathBuf,
    pub scene: Scene,
    /// Stdout of `evaluate` and `reconcile`.
    pub evaluation: String,
    pub reconciliation: String,
}

/// Synthetic 1 km² scene at 0.5 m/px with a register covering about three
/// quarters of the panels plus a few stale entries, run through every
/// batch subcommand.
pub fn run_pipeline(root: &Path) -> Pipeline {
    let scene = Scene::random(7, 1000.0, 0.5, 160, 60.0, 40.0);
    write_scene_ppm(&scene, &root.join("scene.ppm"), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut reg = String::from("id,x,y\n");
    for (i, (x, y)) in scene.panels.iter().enumerate() {
        if rng.gen_bool(0.75) {
            reg += &format!("reg{i:04},{x},{y}\n");
        }
    }
    let (minx, miny, maxx, maxy) = scene.extent();
    for i in 0..5 {
        // Stale entries: no panel at the address.
        let (x, y) = loop {
            let p = (rng.gen_range(minx + 40.0..maxx - 40.0), rng.gen_range(miny + 40.0..maxy - 40.0));
            if !scene.tile_has_panel((p.0 - 15.0, p.1 + 15.0), 30.0) {
                break p;
            }
        };
        reg += &format!("stale{i},{x},{y}\n");
    }
    std::fs::write(root.join("register.csv"), reg).unwrap();

    let coverage = format!("{},{},{},{}", minx + 30.0, miny + 30.0, maxx - 30.0, maxy - 30.0);
    let spec = ["--size-px", "40", "--resolution", "0.5", "--anchor", "center", "--crs", "EPSG:25832"];
    let mut sample = vec!["sample", "--register", "register.csv", "--coverage", &coverage, "--seed", "7", "--name", "synthetic", "--out", "ds/manifest.csv"];
    sample.extend(spec);
    std::fs::create_dir_all(root.join("ds")).unwrap();
    cli_ok(root, &sample);
    cli_ok(root, &["tile", "--raster", "scene.ppm", "--size-px", "40", "--manifest", "ds/manifest.csv", "--edge", "pad-zero", "--out", "ds"]);
    cli_ok(root, &["split", "--manifest", "ds/manifest.csv", "--split", "0.75", "--seed", "11", "--out", "ds/split.csv"]);
    cli_ok(root, &["featurize", "--manifest", "ds/split.csv", "--out", "features.csv"]);
    cli_ok(root, &["train", "--manifest", "ds/split.csv", "--features", "features.csv", "--c", "100", "--epochs", "500", "--seed", "1", "--out", "model.txt"]);
    cli_ok(root, &["score", "--manifest", "ds/split.csv", "--split", "test", "--model", "model.txt", "--features", "features.csv", "--out", "scores.csv"]);
    let evaluation = cli_ok(root, &["evaluate", "--pred", "scores.csv", "--truth", "ds/split.csv", "--split", "test", "--out", "eval.json"]);

    // Ground truth from the scene itself: does the tile show a panel?
    let manifest = std::fs::read_to_string(root.join("ds/split.csv")).unwrap();
    let mut truth = String::from("tile_id,label\n");
    for line in manifest.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[5] != "test" {
            continue;
        }
        let anchor = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let label = if scene.tile_has_panel(anchor, 20.0) { "positive" } else { "negative" };
        truth += &format!("{},{label}\n", f[0]);
    }
    std::fs::write(root.join("scene_truth.csv"), truth).unwrap();
    let reconciliation = cli_ok(root, &["reconcile", "--pred", "scores.csv", "--truth", "scene_truth.csv", "--manifest", "ds/split.csv", "--register", "register.csv", "--out", "new_tiles.csv"]);
    Pipeline { root: root.to_path_buf(), scene, evaluation, reconciliation }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Label(BinaryLabel),
    Excluded,
    Flagged,
    Insufficient,
}

/// Policy applied to one tile's vote counts `[positive, negative, unknown]`.
pub fn consensus_oracle(votes: [usize; 3], policy: &ConsensusPolicy) -> Outcome {
    let n = votes[0] + votes[1] + votes[2];
    if n == 0 || n < policy.min_annotators {
        return Outcome::Insufficient;
    }
    let top = votes.iter().copied().max().unwrap();
    let leaders = votes.iter().filter(|&&v| v == top).count();
    let met = match policy.rule {
        ConsensusRule::Unanimous => top == n,
        ConsensusRule::Majority => 2 * top > n,
    };
    if !met {
        return match policy.conflict_action {
            ConflictAction::MarkUnknown => Outcome::Excluded,
            ConflictAction::FlagForExpert => Outcome::Flagged,
        };
    }
    // A met rule implies a unique leader.
    assert_eq!(leaders, 1);
    match votes.iter().position(|&v| v == top).unwrap() {
        0 => Outcome::Label(BinaryLabel::Positive),
        1 => Outcome::Label(BinaryLabel::Negative),
        _ => Outcome::Excluded,
    }
}

pub fn consensus_outcome(e: &ConsensusExport, id: &str) -> Outcome {
    let hits = [
        e.labels.contains_key(id),
        e.excluded.iter().any(|x| x.tile_id == id),
        e.flagged.iter().any(|x| x.tile_id == id),
        e.insufficient.iter().any(|x| x.tile_id == id),
    ];
    assert_eq!(hits.iter().filter(|h| **h).count(), 1, "{id} listed {hits:?}");
    if let Some(l) = e.labels.get(id) {
        Outcome::Label(*l)
    } else if hits[1] {
        Outcome::Excluded
    } else if hits[2] {
        Outcome::Flagged
    } else {
        Outcome::Insufficient
    }
}

/// Counts, for every pixel of the area spanned by the grid, how many tile
/// footprints contain its center.
pub fn coverage_counts(grid_left: f64, grid_top: f64, res: f64, w: usize, h: usize, tiles: &[WorldBBox]) -> Vec<u32> {
    let mut counts = vec![0u32; w * h];
    for b in tiles {
        // Only pixels near the footprint can have their center inside it.
        let c0 = (((b.min_x - grid_left) / res).floor() as i64 - 2).max(0) as usize;
        let c1 = ((((b.max_x - grid_left) / res).ceil() as i64 + 2).max(0) as usize).min(w);
        let r0 = (((grid_top - b.max_y) / res).floor() as i64 - 2).max(0) as usize;
        let r1 = ((((grid_top - b.min_y) / res).ceil() as i64 + 2).max(0) as usize).min(h);
        for row in r0..r1 {
            for col in c0..c1 {
                let x = grid_left + (col as f64 + 0.5) * res;
                let y = grid_top - (row as f64 + 0.5) * res;
                if x > b.min_x && x < b.max_x && y > b.min_y && y < b.max_y {
                    counts[row * w + col] += 1;
                }
            }
        }
    }
    counts
}

/// Tiles a lattice-aligned bbox of `nx`×`ny` tiles (the last row/column
/// shortened by `short_*` pixels) and checks coverage, disjointness and
/// overhang flags pixel by pixel.
#[allow(clippy::too_many_arguments)]
pub fn check_grid(nx: u32, ny: u32, size_px: u32, res: f64, short_x: u32, short_y: u32, left: f64, top: f64) -> Result<(), String> {
    let spec = TileSpec::new(size_px, res, TileAnchor::TopLeft).unwrap();
    let w_px = nx * size_px - short_x.min(size_px - 1);
    let h_px = ny * size_px - short_y.min(size_px - 1);
    let bbox = WorldBBox::new(left, top - f64::from(h_px) * res, left + f64::from(w_px) * res, top).unwrap();
    let grid = tile_grid(&bbox, &spec);
    if grid.len() != (nx * ny) as usize {
        return Err(format!("{} tiles, expected {}", grid.len(), nx * ny));
    }

    let (gw, gh) = ((nx * size_px) as usize, (ny * size_px) as usize);
    let footprints: Vec<WorldBBox> = grid.iter().map(|g| spec.footprint_at(g.anchor.0, g.anchor.1)).collect();
    let counts = coverage_counts(left, top, res, gw, gh, &footprints);
    for row in 0..gh {
        for col in 0..gw {
            // Disjoint everywhere, covering at least the bbox.
            if counts[row * gw + col] > 1 {
                return Err(format!("pixel ({col},{row}) covered twice"));
            }
            if col < w_px as usize && row < h_px as usize {
                if counts[row * gw + col] != 1 {
                    return Err(format!("pixel ({col},{row}) uncovered"));
                }
            }
        }
    }
    for g in &grid {
        let fp = spec.footprint_at(g.anchor.0, g.anchor.1);
        let past = fp.max_x > bbox.max_x + 1e-6 || fp.min_y < bbox.min_y - 1e-6;
        if g.overhang != past {
            return Err(format!("tile ({},{}) overhang flag {}", g.row, g.col, g.overhang));
        }
    }
    Ok(())
}
