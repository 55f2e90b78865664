mod common;

use common::*;
use std::time::{Duration, Instant};
use texmesh_core::geometry::AugmentConfig;
use texmesh_core::model::{GlobalMode, Modality, Model, ModelConfig};
use texmesh_core::train::{PreparedTile, TrainConfig, Trainer};
use texmesh_core::Error;

fn tiny_model() -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        face_dim: 8,
        blocks: 1,
        heads: 2,
        classes: 2,
        pixels_per_face: 6,
        clusters: 4,
        modality: Modality::Both,
        global_mode: GlobalMode::SelfAttention,
        dropout: 0.1,
    }
}

fn tiles(cfg: &ModelConfig) -> Vec<PreparedTile> {
    [SceneKind::Texture, SceneKind::Geometry]
        .into_iter()
        .enumerate()
        .map(|(i, k)| PreparedTile::prepare(format!("tile{i}"), &synthetic_scene(k, 5, 16, i as u64), cfg, 3).unwrap())
        .collect()
}

fn augmented_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed: 42,
        augment: AugmentConfig::default(),
        ..TrainConfig::default()
    }
}

#[test]
fn color_separable_scene_is_learned() {
    let start = Instant::now();
    assert!(overfit_scene(SceneKind::Texture, Modality::Both, 2) >= 0.99);
    assert!(start.elapsed() < Duration::from_secs(300));
}

#[test]
fn geometry_separable_scene_is_learned_from_geometry_alone() {
    let start = Instant::now();
    assert!(overfit_scene(SceneKind::Geometry, Modality::Geometry, 2) >= 0.99);
    assert!(start.elapsed() < Duration::from_secs(300));
}

#[test]
fn both_modalities_beat_either_alone_on_a_mixed_scene() {
    let both = overfit_scene(SceneKind::Mixed, Modality::Both, 4);
    let geometry = overfit_scene(SceneKind::Mixed, Modality::Geometry, 4);
    let texture = overfit_scene(SceneKind::Mixed, Modality::Texture, 4);
    assert!(both > geometry && both > texture, "{both} {geometry} {texture}");
}

#[test]
fn same_seed_gives_identical_histories() {
    let cfg = tiny_model();
    let t = tiles(&cfg);
    let run = || {
        let mut tr = Trainer::new(Model::new(cfg.clone(), 5).unwrap(), augmented_config(4), &t, &t).unwrap();
        tr.run().unwrap();
        (tr.history().to_vec(), tr.model().store().clone())
    };
    let (h1, p1) = run();
    let (h2, p2) = run();
    assert_eq!(h1.len(), 8);
    assert_eq!(h1, h2);
    assert_eq!(p1, p2);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let cfg = tiny_model();
    let t = tiles(&cfg);
    let mut full = Trainer::new(Model::new(cfg.clone(), 5).unwrap(), augmented_config(5), &t, &t).unwrap();
    full.run().unwrap();

    let mut first = Trainer::new(Model::new(cfg.clone(), 5).unwrap(), augmented_config(5), &t, &t).unwrap();
    first.run_steps(3).unwrap();
    let state = first.state();
    drop(first);
    let mut second = Trainer::resume(state, &t, &t).unwrap();
    second.run().unwrap();
    assert_eq!(second.state(), full.state());
}

#[test]
fn schedule_anchors_appear_in_history() {
    let cfg = tiny_model();
    let t = tiles(&cfg);
    let mut tr = Trainer::new(Model::new(cfg, 1).unwrap(), augmented_config(3), &t, &t).unwrap();
    tr.run().unwrap();
    let h = tr.history();
    assert_eq!(h[0].lr, 1e-4);
    assert_eq!(h[3].lr, 1e-6);
    assert_eq!(h[5].lr, 1e-6);
    assert!(h.windows(2).all(|w| w[1].lr <= w[0].lr));
}

#[test]
fn best_snapshot_tracks_highest_validation_mf1() {
    let cfg = tiny_model();
    let t = tiles(&cfg);
    let mut tr = Trainer::new(Model::new(cfg, 1).unwrap(), augmented_config(4), &t, &t).unwrap();
    tr.run().unwrap();
    let best = tr.best().unwrap();
    let top = tr.validations().iter().map(|v| v.mf1).fold(f64::MIN, f64::max);
    assert_eq!(tr.validations().len(), 4);
    assert_eq!(best.mf1, top);
    let first_top = tr.validations().iter().find(|v| v.mf1 == top).unwrap();
    assert_eq!(best.epoch, first_top.epoch);
}

#[test]
fn unlabeled_tiles_are_skipped_and_all_unlabeled_is_an_error() {
    let cfg = tiny_model();
    let mut t = tiles(&cfg);
    let mut blank = t[0].clone();
    blank.labels = vec![None; blank.face_count()];
    assert_eq!(
        Trainer::new(Model::new(cfg.clone(), 1).unwrap(), augmented_config(1), std::slice::from_ref(&blank), &t).err(),
        Some(Error::NoLabels)
    );
    assert!(Trainer::new(Model::new(cfg.clone(), 1).unwrap(), augmented_config(1), &t, &[]).is_err());

    t.push(blank);
    let mut tr = Trainer::new(Model::new(cfg, 1).unwrap(), augmented_config(6), &t, &t[..2]).unwrap();
    tr.run().unwrap();
    assert_eq!(tr.history().len(), 18);
    assert!(tr.history().iter().any(|h| h.loss.is_none()));
    assert!(tr.history().iter().any(|h| h.loss.is_some()));
}

#[test]
fn multi_tile_batches_pool_labeled_faces() {
    let cfg = tiny_model();
    let t = tiles(&cfg);
    let mut tcfg = augmented_config(2);
    tcfg.tiles_per_batch = 3;
    let mut tr = Trainer::new(Model::new(cfg, 1).unwrap(), tcfg, &t, &t).unwrap();
    tr.run().unwrap();
    assert!(tr.history().iter().all(|h| h.loss.unwrap().is_finite()));
}

#[test]
fn untrained_loss_is_near_ln_c() {
    let cfg = ModelConfig {
        classes: 6,
        ..tiny_model()
    };
    let t = tiles(&cfg);
    let mut tr = Trainer::new(Model::new(cfg, 1).unwrap(), augmented_config(1), &t, &t).unwrap();
    let first = tr.step().unwrap().loss.unwrap();
    assert!((first - 6f64.ln()).abs() < 1.0, "{first}");
}
