//! The pipeline commands behind the CLI: preprocess, train, predict,
//! evaluate and export.

use std::fs;
use std::path::{Path, PathBuf};

use texmesh_core::metrics::MetricsReport;
use texmesh_core::model::Model;
use texmesh_core::train::{evaluate_tiles, predict_tile, PreparedTile, Trainer};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{load_tile_list, prepare_tile, CacheOutcome, FeatureCache, TileSource};
use crate::error::{Error, Result};
use crate::obj::export_labeled_mesh;
use crate::palette::ClassPalette;
use crate::report::{history_csv, metrics_text, predictions_csv, validation_csv, write_file};

pub const LAST_CHECKPOINT: &str = "last.json";
pub const BEST_CHECKPOINT: &str = "best.json";

fn required_list(path: &Option<PathBuf>, what: &str) -> Result<Vec<TileSource>> {
    let path = path
        .as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} tile list configured")))?;
    load_tile_list(path)
}

fn cache(cfg: &RunConfig) -> FeatureCache {
    FeatureCache::new(cfg.cache_dir())
}

fn prepare_all(cfg: &RunConfig, tiles: &[TileSource], with_labels: bool) -> Result<Vec<PreparedTile>> {
    let model = cfg.model();
    let cache = cache(cfg);
    tiles
        .iter()
        .map(|t| prepare_tile(t, &model, cfg.seed, with_labels, Some(&cache)).map(|(p, _)| p))
        .collect()
}

pub fn palette(cfg: &RunConfig) -> Result<ClassPalette> {
    match &cfg.palette {
        Some(p) => ClassPalette::load(p),
        None => Ok(ClassPalette::default_for(cfg.classes)),
    }
}

/// Loads a checkpoint and checks it against the configured architecture.
pub fn load_model(cfg: &RunConfig, checkpoint: &Path) -> Result<Model> {
    let ck = Checkpoint::load(checkpoint)?;
    ck.check_compatible(&cfg.model())?;
    ck.model()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub computed: Vec<String>,
    pub reused: Vec<String>,
}

/// Fills the feature cache for every configured tile. All tiles are
/// attempted; any failure makes the command fail afterwards.
pub fn preprocess(cfg: &RunConfig) -> Result<PreprocessSummary> {
    let mut tiles: Vec<TileSource> = Vec::new();
    for list in [&cfg.train_tiles, &cfg.val_tiles, &cfg.test_tiles].into_iter().flatten() {
        for t in load_tile_list(list)? {
            if !tiles.contains(&t) {
                tiles.push(t);
            }
        }
    }
    if tiles.is_empty() {
        return Err(Error::Config("no tile lists configured".into()));
    }
    let model = cfg.model();
    model.validate()?;
    let cache = cache(cfg);
    let mut summary = PreprocessSummary::default();
    let mut failed = Vec::new();
    for t in &tiles {
        match prepare_tile(t, &model, cfg.seed, false, Some(&cache)) {
            Ok((_, CacheOutcome::Hit)) => summary.reused.push(t.name.clone()),
            Ok((_, CacheOutcome::Computed)) => {
                log::info!("preprocessed {}", t.name);
                summary.computed.push(t.name.clone());
            }
            Err(e) => {
                log::error!("{e}");
                failed.push(t.name.clone());
            }
        }
    }
    if !failed.is_empty() {
        return Err(Error::Config(format!("preprocessing failed for tile(s): {}", failed.join(", "))));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Continue from `last.json` in the output directory.
    pub resume: bool,
    /// Stop after this many steps in this invocation.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps_done: usize,
    pub total_steps: usize,
    pub best_mf1: Option<f64>,
}

fn save_progress(trainer: &Trainer<'_>, out: &Path) -> Result<()> {
    Checkpoint::from_state(trainer.state()).save(&out.join(LAST_CHECKPOINT))?;
    write_file(&out.join("history.csv"), &history_csv(trainer.history()))?;
    write_file(&out.join("validation.csv"), &validation_csv(trainer.validations()))
}

/// Trains on the configured tiles, keeping `last.json` (written every epoch
/// and on exit) and `best.json` (highest validation mF1).
pub fn train(cfg: &RunConfig, opts: TrainOptions) -> Result<TrainSummary> {
    cfg.validate()?;
    let train_tiles = prepare_all(cfg, &required_list(&cfg.train_tiles, "training")?, true)?;
    let val_tiles = prepare_all(cfg, &required_list(&cfg.val_tiles, "validation")?, true)?;
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut trainer = if opts.resume {
        let ck = Checkpoint::load(&out.join(LAST_CHECKPOINT))?;
        ck.check_compatible(&cfg.model())?;
        let state = ck
            .training
            .ok_or_else(|| Error::Config("checkpoint has no training state to resume".into()))?;
        if state.train != cfg.train() {
            return Err(texmesh_core::Error::ConfigMismatch("training settings differ from the checkpoint".into()).into());
        }
        Trainer::resume(state, &train_tiles, &val_tiles)?
    } else {
        Trainer::new(Model::new(cfg.model(), cfg.seed)?, cfg.train(), &train_tiles, &val_tiles)?
    };

    let per_epoch = trainer.steps_per_epoch();
    let mut best_epoch = trainer.best().map(|b| b.epoch);
    let mut budget = opts.max_steps.unwrap_or(usize::MAX);
    while !trainer.is_finished() && budget > 0 {
        let record = trainer.step()?;
        budget -= 1;
        log::debug!("step {} lr {:e} loss {:?}", record.step, record.lr, record.loss);
        if trainer.steps_done().is_multiple_of(per_epoch) {
            save_progress(&trainer, out)?;
            let epoch = trainer.best().map(|b| b.epoch);
            if epoch != best_epoch {
                Checkpoint::from_model(&trainer.best_model()?).save(&out.join(BEST_CHECKPOINT))?;
                best_epoch = epoch;
            }
        }
    }
    save_progress(&trainer, out)?;
    if trainer.best().is_some() && !out.join(BEST_CHECKPOINT).exists() {
        Checkpoint::from_model(&trainer.best_model()?).save(&out.join(BEST_CHECKPOINT))?;
    }
    Ok(TrainSummary {
        steps_done: trainer.steps_done(),
        total_steps: trainer.total_steps(),
        best_mf1: trainer.best().map(|b| b.mf1),
    })
}

/// Writes `<out>/<tile>.csv` per tile and returns the paths.
pub fn predict(cfg: &RunConfig, checkpoint: &Path, tiles: &[TileSource], out: &Path) -> Result<Vec<PathBuf>> {
    let model = load_model(cfg, checkpoint)?;
    let prepared = prepare_all(cfg, tiles, false)?;
    let mut written = Vec::new();
    for tile in &prepared {
        let pred = predict_tile(&model, tile).map_err(|e| Error::from(e).in_tile(&tile.name))?;
        let path = out.join(format!("{}.csv", tile.name));
        write_file(&path, &predictions_csv(&pred))?;
        written.push(path);
    }
    Ok(written)
}

/// Pooled metrics over `tiles`, written to `metrics.txt` and `metrics.json` in `out`.
pub fn evaluate(cfg: &RunConfig, checkpoint: &Path, tiles: &[TileSource], out: &Path) -> Result<MetricsReport> {
    let model = load_model(cfg, checkpoint)?;
    let prepared = prepare_all(cfg, tiles, true)?;
    let report = evaluate_tiles(&model, &prepared)?;
    let names = palette(cfg).ok();
    write_file(&out.join("metrics.txt"), &metrics_text(&report, names.as_ref()))?;
    let json = serde_json::to_string_pretty(&report).map_err(|source| Error::Json {
        path: out.join("metrics.json"),
        source,
    })?;
    write_file(&out.join("metrics.json"), &json)?;
    Ok(report)
}

/// Writes a class-colored `<out>/<tile>.obj` and the score CSV per tile.
pub fn export(cfg: &RunConfig, checkpoint: &Path, tiles: &[TileSource], out: &Path) -> Result<Vec<PathBuf>> {
    let model = load_model(cfg, checkpoint)?;
    let palette = palette(cfg)?;
    let mut written = Vec::new();
    for t in tiles {
        let mesh = t.load_mesh(cfg.classes, false)?;
        let (tile, _) = prepare_tile(t, &cfg.model(), cfg.seed, false, Some(&cache(cfg)))?;
        let pred = predict_tile(&model, &tile).map_err(|e| Error::from(e).in_tile(&t.name))?;
        let labels: Vec<_> = pred.labels.iter().map(|&l| Some(l)).collect();
        let path = out.join(format!("{}.obj", t.name));
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        export_labeled_mesh(&mesh, &labels, &palette, &path).map_err(|e| e.in_tile(&t.name))?;
        write_file(&out.join(format!("{}.csv", t.name)), &predictions_csv(&pred))?;
        written.push(path);
    }
    Ok(written)
}
