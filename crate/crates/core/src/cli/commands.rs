use std::collections::{BTreeSet, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use super::args::*;
use super::{read_record, run, UsageError};
use crate::annotation::{
    preannotate, router, AnnotationStore, ConflictAction, ConsensusPolicy, ConsensusRule, ServiceState,
};
use crate::baseline::{
    band_statistics, external_score, features_by_tile, predict_score, read_features, read_model, train,
    write_features, write_model, FeatureVector, TrainConfig,
};
use crate::dataset::{
    read_manifest, read_register, sample_negatives, sample_positives, stratified_split, write_manifest,
    DatasetManifest, Jitter, Split, SplitFractions, TileLabel, TileRecord,
};
use crate::metrics::{
    compare_runs, confusion, detections_to_label, read_detections, read_labels, read_predictions, report,
    write_scores, BinaryLabel, ClassificationReport, ConfusionMatrix, Predictions,
};
use crate::raster_geo::{
    build_remote_request, extract_tile, pixel_size_for, read_raster, tile_grid, world_file_path, write_raster,
    EdgePolicy, GeoError, GeoTransform, TileAnchor, TileSpec, WorldBBox,
};
use crate::reconcile::{match_tiles, point_to_polygon, read_polygons, reconcile, RegisterPolygon};

const MANIFEST_MAGIC: &str = "# pvtiles manifest";

pub(super) fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Tile(a) => tile(a),
        Command::Sample(a) => sample(a),
        Command::Split(a) => split(a),
        Command::ServeAnnotation(a) => serve(a),
        Command::ExportLabels(a) => export_labels(a),
        Command::Preannotate(a) => preannotate_cmd(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(a) => train_cmd(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Reconcile(a) => reconcile_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Fetch(a) => fetch(a),
        Command::Replay(a) => replay(a),
    }
}

fn ctx(path: &Path) -> String {
    path.display().to_string()
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    read_manifest(path).with_context(|| ctx(path))
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn selected(m: &DatasetManifest, split: SplitArg) -> Vec<&TileRecord> {
    m.records
        .iter()
        .filter(|r| match split {
            SplitArg::All => true,
            SplitArg::Train => r.split == Split::Train,
            SplitArg::Test => r.split == Split::Test,
        })
        .collect()
}

fn binary(label: TileLabel) -> Option<BinaryLabel> {
    match label {
        TileLabel::Positive => Some(BinaryLabel::Positive),
        TileLabel::Negative => Some(BinaryLabel::Negative),
        _ => None,
    }
}

fn is_manifest(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| ctx(path))?;
    Ok(text.starts_with(MANIFEST_MAGIC))
}

/// Ground truth from a `tile_id,label` file or from the binary-labeled
/// records of a manifest.
fn load_truth(path: &Path, split: SplitArg) -> Result<HashMap<String, BinaryLabel>> {
    if is_manifest(path)? {
        let m = load_manifest(path)?;
        Ok(selected(&m, split)
            .into_iter()
            .filter_map(|r| binary(r.label).map(|l| (r.tile_id.clone(), l)))
            .collect())
    } else {
        Ok(read_labels(path).with_context(|| ctx(path))?)
    }
}

fn edge_policy(e: EdgeArg) -> EdgePolicy {
    match e {
        EdgeArg::PadZero => EdgePolicy::PadZero,
        _ => EdgePolicy::Error,
    }
}

/// Extracts one tile; `Ok(None)` when skipped under `--edge skip`.
fn cut(raster: &crate::raster_geo::Raster, anchor: (f64, f64), spec: &TileSpec, edge: EdgeArg) -> Result<Option<crate::raster_geo::Raster>> {
    match extract_tile(raster, anchor, spec, edge_policy(edge)) {
        Ok(t) => Ok(Some(t)),
        Err(GeoError::OutOfBounds { .. }) if matches!(edge, EdgeArg::Skip) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn tile(a: &TileArgs) -> Result<()> {
    let raster = read_raster(&a.raster, &a.crs).with_context(|| ctx(&a.raster))?;
    std::fs::create_dir_all(&a.out).with_context(|| ctx(&a.out))?;
    let res = raster.transform.a.abs();
    let mut skipped = 0usize;
    let mut written = 0usize;

    if let Some(mpath) = &a.manifest {
        let m = load_manifest(mpath)?;
        for r in &m.records {
            let Some(t) = cut(&raster, r.anchor, &m.spec, a.edge).with_context(|| format!("tile {}", r.tile_id))? else {
                skipped += 1;
                continue;
            };
            let p = a.out.join(&r.image_ref);
            if let Some(d) = p.parent() {
                std::fs::create_dir_all(d)?;
            }
            write_raster(&p, &t).with_context(|| ctx(&p))?;
            written += 1;
        }
        let same_dir = std::fs::canonicalize(manifest_dir(mpath).join(".")).ok() == std::fs::canonicalize(&a.out).ok();
        if !same_dir {
            write_manifest(&a.out.join("manifest.csv"), &m)?;
        }
    } else {
        if raster.transform.b != 0.0 || raster.transform.d != 0.0 {
            bail!("grid tiling needs a north-up raster");
        }
        let spec = TileSpec::new(a.size_px, res, TileAnchor::TopLeft)?;
        let bbox = match a.bbox {
            Some(b) => b,
            None => {
                let (left, top) = raster.transform.corner();
                WorldBBox::new(
                    left,
                    top - f64::from(raster.height()) * res,
                    left + f64::from(raster.width()) * res,
                    top,
                )?
            }
        };
        let mut m = DatasetManifest::new(
            a.raster.file_stem().map_or("grid".into(), |s| s.to_string_lossy().into_owned()),
            spec,
            a.crs.clone(),
            0,
        );
        for g in tile_grid(&bbox, &spec) {
            let id = format!("r{:04}c{:04}", g.row, g.col);
            let Some(t) = cut(&raster, g.anchor, &spec, a.edge).with_context(|| format!("tile {id}"))? else {
                skipped += 1;
                continue;
            };
            let rec = TileRecord::new(id, g.anchor, TileLabel::Unlabeled);
            let p = a.out.join(&rec.image_ref);
            std::fs::create_dir_all(p.parent().expect("tile path has a parent"))?;
            write_raster(&p, &t).with_context(|| ctx(&p))?;
            m.records.push(rec);
            written += 1;
        }
        write_manifest(&a.out.join("manifest.csv"), &m)?;
    }
    eprintln!("wrote {written} tiles to {}, skipped {skipped}", a.out.display());
    Ok(())
}

fn spec_of(s: &SpecArgs) -> Result<TileSpec> {
    let anchor = match s.anchor {
        AnchorArg::TopLeft => TileAnchor::TopLeft,
        AnchorArg::Center => TileAnchor::Center,
    };
    Ok(TileSpec::new(s.size_px, s.resolution, anchor)?)
}

fn sample(a: &SampleArgs) -> Result<()> {
    let spec = spec_of(&a.spec)?;
    let register = read_register(&a.register, "register").with_context(|| ctx(&a.register))?;
    let jitter = if a.jitter { Jitter::Uniform { seed: a.seed } } else { Jitter::Off };
    let pos = sample_positives(&register, &a.coverage, &spec, jitter);
    let n_neg = a.negatives.unwrap_or(pos.records.len());
    let neg = sample_negatives(&a.coverage, &register, a.exclusion_radius, n_neg, a.seed, &spec)?;
    let mut m = DatasetManifest::new(a.name.clone(), spec, a.spec.crs.clone(), a.seed);
    let n_pos = pos.records.len();
    m.records.extend(pos.records);
    m.records.extend(neg);
    write_manifest(&a.out, &m).with_context(|| ctx(&a.out))?;
    eprintln!(
        "{n_pos} positives, {n_neg} negatives, {} register points outside coverage",
        pos.skipped.len()
    );
    Ok(())
}

fn split(a: &SplitArgs) -> Result<()> {
    let m = load_manifest(&a.manifest)?;
    let fr = SplitFractions::from_train(a.train)?;
    let out = stratified_split(&m, fr, a.seed)?;
    write_manifest(&a.out, &out).with_context(|| ctx(&a.out))?;
    let n_train = out.in_split(Split::Train).count();
    eprintln!("train {n_train}, test {}", out.records.len() - n_train);
    Ok(())
}

fn store_for(manifests: &[PathBuf], log: &Path) -> Result<AnnotationStore> {
    let mut store = AnnotationStore::new();
    for p in manifests {
        let m = load_manifest(p)?;
        store.add_dataset(m, manifest_dir(p));
    }
    store.open_log(log).with_context(|| ctx(log))?;
    Ok(store)
}

fn serve(a: &ServeArgs) -> Result<()> {
    let mut store = store_for(&a.manifests, &a.log)?;
    for (user, ds) in &a.assignments {
        store.assign(user, ds).map_err(|e| UsageError(e.to_string()))?;
    }
    let app = router(Arc::new(ServiceState::new(store)));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.bind).await.with_context(|| a.bind.clone())?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn export_labels(a: &ExportArgs) -> Result<()> {
    if !a.log.exists() {
        bail!("{}: annotation log not found", a.log.display());
    }
    let store = store_for(std::slice::from_ref(&a.manifest), &a.log)?;
    let mut m = load_manifest(&a.manifest)?;
    let policy = ConsensusPolicy {
        min_annotators: a.min_annotators,
        rule: match a.rule {
            RuleArg::Unanimous => ConsensusRule::Unanimous,
            RuleArg::Majority => ConsensusRule::Majority,
        },
        conflict_action: match a.conflict_action {
            ConflictArg::MarkUnknown => ConflictAction::MarkUnknown,
            ConflictArg::FlagForExpert => ConflictAction::FlagForExpert,
        },
    };
    policy.validate().map_err(|e| UsageError(e.to_string()))?;
    let e = store.export(&m.name, &policy)?;
    e.apply(&mut m);
    write_manifest(&a.out, &m).with_context(|| ctx(&a.out))?;
    if let Some(d) = &a.details {
        std::fs::write(d, serde_json::to_string_pretty(&e)? + "\n").with_context(|| ctx(d))?;
    }
    eprintln!(
        "{} labeled, {} excluded, {} flagged, {} without enough annotators",
        e.labels.len(),
        e.excluded.len(),
        e.flagged.len(),
        e.insufficient.len()
    );
    Ok(())
}

fn read_scores_file(path: &Path) -> Result<HashMap<String, f64>> {
    match read_predictions(path).with_context(|| ctx(path))? {
        Predictions::Scores(s) => Ok(s),
        Predictions::Labels(_) => bail!("{}: expected tile_id,score", path.display()),
    }
}

fn preannotate_cmd(a: &PreannotateArgs) -> Result<()> {
    let m = load_manifest(&a.manifest)?;
    let scores = read_scores_file(&a.scores)?;
    let ids: Vec<&str> = m.records.iter().map(|r| r.tile_id.as_str()).collect();
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64);
    let recs = preannotate(&ids, &scores, a.threshold, now)?;
    let store = store_for(std::slice::from_ref(&a.manifest), &a.log)?;
    let n = store.apply_preannotation(&m.name, &recs)?;
    eprintln!("pre-annotated {n} of {} tiles", ids.len());
    Ok(())
}

fn features_for(mpath: &Path, records: &[&TileRecord], crs: &str) -> Result<Vec<(String, FeatureVector)>> {
    let dir = manifest_dir(mpath);
    records
        .iter()
        .map(|r| {
            let p = dir.join(&r.image_ref);
            let img = read_raster(&p, crs).with_context(|| ctx(&p))?;
            Ok((r.tile_id.clone(), band_statistics(&img)))
        })
        .collect()
}

fn featurize(a: &FeaturizeArgs) -> Result<()> {
    let m = load_manifest(&a.manifest)?;
    let rows = features_for(&a.manifest, &selected(&m, a.split), &a.crs)?;
    write_features(&a.out, &rows).with_context(|| ctx(&a.out))?;
    eprintln!("{} feature rows", rows.len());
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let m = load_manifest(&a.manifest)?;
    let feats = features_by_tile(read_features(&a.features).with_context(|| ctx(&a.features))?);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in selected(&m, a.split) {
        let Some(l) = binary(r.label) else { continue };
        let x = feats
            .get(&r.tile_id)
            .ok_or_else(|| anyhow!("no features for tile {}", r.tile_id))?;
        xs.push(x.clone());
        ys.push(u8::from(l == BinaryLabel::Positive));
    }
    let cfg = TrainConfig {
        c: a.c,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let model = train(&xs, &ys, &cfg, a.kind.into())?;
    write_model(&a.out, &model).with_context(|| ctx(&a.out))?;
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| (model.margin(x).unwrap_or(0.0) >= 0.0) == (**y == 1))
        .count();
    eprintln!("trained on {} tiles, training accuracy {:.4}", xs.len(), correct as f64 / xs.len() as f64);
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<()> {
    let m = load_manifest(&a.manifest)?;
    let records = selected(&m, a.split);
    let scores: HashMap<String, f64> = if a.external {
        let dir = a
            .exchange_dir
            .as_ref()
            .ok_or_else(|| UsageError(format!("--external needs --exchange-dir or {EXCHANGE_ENV}")))?;
        external_score(dir, &records)?
    } else {
        let mpath = a.model.as_ref().expect("clap requires --model without --external");
        let model = read_model(mpath).with_context(|| ctx(mpath))?;
        let feats = match &a.features {
            Some(f) => features_by_tile(read_features(f).with_context(|| ctx(f))?),
            None => features_for(&a.manifest, &records, &a.crs)?.into_iter().collect(),
        };
        records
            .iter()
            .map(|r| {
                let x = feats
                    .get(&r.tile_id)
                    .ok_or_else(|| anyhow!("no features for tile {}", r.tile_id))?;
                Ok((r.tile_id.clone(), predict_score(&model, x)?))
            })
            .collect::<Result<_>>()?
    };
    write_scores(&a.out, &scores).with_context(|| ctx(&a.out))?;
    eprintln!("scored {} tiles", scores.len());
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let truth = load_truth(&a.truth, a.split)?;
    let pred: HashMap<String, BinaryLabel> = if let Some(p) = &a.pred {
        read_predictions(p).with_context(|| ctx(p))?.into_labels(a.threshold)?
    } else {
        let dpath = a.detections.as_ref().expect("clap requires --pred or --detections");
        let dets = read_detections(dpath).with_context(|| ctx(dpath))?;
        let stray: BTreeSet<&String> = dets.keys().filter(|k| !truth.contains_key(*k)).collect();
        if !stray.is_empty() {
            bail!("detections for tiles absent from the ground truth: {stray:?}");
        }
        truth
            .keys()
            .map(|id| {
                let d = dets.get(id).map(Vec::as_slice).unwrap_or(&[]);
                Ok((id.clone(), detections_to_label(d, a.det_threshold)?))
            })
            .collect::<Result<_>>()?
    };
    let m = confusion(&pred, &truth)?;
    let r = report(&m)?;
    let json = serde_json::json!({ "confusion": m, "report": r });
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&json)? + "\n").with_context(|| ctx(out))?;
    }
    match a.format {
        Format::Json => print_json(&json),
        Format::Text => {
            print!("{}", r.render_text());
            println!();
            print!("{}", m.render_shares());
        }
    }
    Ok(())
}

fn load_report(path: &Path) -> Result<ClassificationReport> {
    let text = std::fs::read_to_string(path).with_context(|| ctx(path))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| ctx(path))?;
    let inner = v.get("report").cloned().unwrap_or(v);
    serde_json::from_value(inner).with_context(|| format!("{}: not a saved report", path.display()))
}

fn compare(a: &CompareArgs) -> Result<()> {
    let d = compare_runs(&load_report(&a.first)?, &load_report(&a.second)?);
    match a.format {
        Format::Json => print_json(&serde_json::to_value(&d)?),
        Format::Text => print!("{}", d.render_text()),
    }
    Ok(())
}

fn read_flags(path: &Path) -> Result<HashMap<String, bool>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| ctx(path))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if header != ["tile_id", "matched"] {
        bail!("{}:1: expected header tile_id,matched", path.display());
    }
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| ctx(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = match rec[1].to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => bail!("{}:{line}: invalid flag {other:?}", path.display()),
        };
        if out.insert(rec[0].to_string(), v).is_some() {
            bail!("{}:{line}: duplicate tile_id {:?}", path.display(), &rec[0]);
        }
    }
    Ok(out)
}

fn reconcile_cmd(a: &ReconcileArgs) -> Result<()> {
    let truth = load_truth(&a.truth, a.split)?;
    let pred = read_predictions(&a.pred).with_context(|| ctx(&a.pred))?.into_labels(a.threshold)?;
    let matched = if let Some(f) = &a.flags {
        read_flags(f)?
    } else {
        let mpath = a.manifest.as_ref().expect("clap requires --manifest without --flags");
        let m = load_manifest(mpath)?;
        let polygons: Vec<RegisterPolygon> = match (&a.register, &a.polygons) {
            (Some(r), None) => read_register(r, "register")
                .with_context(|| ctx(r))?
                .iter()
                .map(|p| point_to_polygon(p, a.half_size))
                .collect::<Result<_, _>>()?,
            (None, Some(p)) => read_polygons(p).with_context(|| ctx(p))?,
            _ => return Err(UsageError("geometry mode needs --register or --polygons".into()).into()),
        };
        let ids: Vec<&String> = {
            let mut v: Vec<&String> = truth.keys().collect();
            v.sort();
            v
        };
        let tiles = ids
            .iter()
            .map(|id| {
                m.get(id)
                    .map(|r| r.footprint(&m.spec))
                    .ok_or_else(|| anyhow!("tile {id} not in {}", mpath.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let reg_crs = a.register_crs.as_deref().unwrap_or(&m.crs_id);
        let flags = match_tiles(&tiles, &m.crs_id, &polygons, reg_crs)?;
        ids.into_iter().cloned().zip(flags).collect()
    };
    let rep = reconcile(&pred, &truth, &matched)?;
    if let Some(out) = &a.out {
        let mut new: Vec<&String> = pred
            .iter()
            .filter(|(id, p)| {
                **p == BinaryLabel::Positive
                    && truth.get(*id) == Some(&BinaryLabel::Positive)
                    && matched.get(*id) == Some(&false)
            })
            .map(|(id, _)| id)
            .collect();
        new.sort();
        let mut f = std::fs::File::create(out).with_context(|| ctx(out))?;
        writeln!(f, "tile_id")?;
        for id in new {
            writeln!(f, "{id}")?;
        }
    }
    match a.format {
        Format::Json => print_json(&serde_json::json!({
            "report": rep,
            "tp": rep.tp(),
            "new_fraction": rep.new_fraction(),
        })),
        Format::Text => print!("{}", rep.render_text()),
    }
    Ok(())
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    let m = ConfusionMatrix::new(a.tp, a.fp, a.tn, a.fn_);
    let r = report(&m)?;
    match a.format {
        Format::Json => print_json(&serde_json::json!({ "confusion": m, "report": r })),
        Format::Text => {
            print!("{}", r.render_text());
            println!();
            print!("{}", m.render_shares());
        }
    }
    Ok(())
}

fn fetch(a: &FetchArgs) -> Result<()> {
    let size = pixel_size_for(&a.bbox, a.resolution);
    let req = build_remote_request(&a.template, &a.bbox, size, &a.crs).map_err(|e| UsageError(e.to_string()))?;
    if a.dry_run {
        println!("{}", req.url);
        return Ok(());
    }
    let mut resp = ureq::get(&req.url).call().with_context(|| req.url.clone())?;
    let ct = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let body = resp
        .body_mut()
        .with_config()
        .limit(512 * 1024 * 1024)
        .read_to_vec()
        .with_context(|| req.url.clone())?;
    if !ct.is_empty() && !ct.starts_with(&req.content_type) {
        let head = String::from_utf8_lossy(&body[..body.len().min(300)]).into_owned();
        bail!("expected {} but the server sent {ct}: {head}", req.content_type);
    }
    std::fs::write(&a.out, &body).with_context(|| ctx(&a.out))?;
    let t = GeoTransform::north_up(a.bbox.min_x, a.bbox.max_y, a.resolution, a.crs.clone());
    let wf = world_file_path(&a.out);
    std::fs::write(&wf, t.to_world_file()).with_context(|| ctx(&wf))?;
    eprintln!("wrote {} bytes ({}x{} px) to {}", body.len(), size.0, size.1, a.out.display());
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let rec = read_record(&a.run).with_context(|| ctx(&a.run))?;
    if rec.subcommand == "replay" {
        bail!("refusing to replay a replay record");
    }
    if rec.version != env!("CARGO_PKG_VERSION") {
        eprintln!("warning: record made by version {}, running {}", rec.version, env!("CARGO_PKG_VERSION"));
    }
    std::env::set_current_dir(&rec.cwd).with_context(|| ctx(&rec.cwd))?;
    match run(rec.argv) {
        0 => Ok(()),
        code => bail!("replayed command exited with status {code}"),
    }
}
