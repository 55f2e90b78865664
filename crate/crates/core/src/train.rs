//! Training loop, tile preparation and evaluation helpers.
//!
//! A batch is one tile (configurable): all labeled faces of the drawn
//! tiles enter a masked cross-entropy. Each optimizer step draws its
//! randomness from its own ChaCha stream, so a run resumed from a saved
//! [`TrainState`] continues exactly as an uninterrupted one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_mesh, BatchLayout, ClusterAssignment};
use crate::error::{Error, Result};
use crate::geometry::{augment_vertices, descriptor_matrix, face_descriptors, normalize_vertices, Adjacency, AugmentConfig, DESCRIPTOR_LEN};
use crate::mesh::{Label, Mesh};
use crate::metrics::{MetricsReport, Tally};
use crate::model::{Model, ModelConfig, ModelInput, Prediction};
use crate::nn::graph::Graph;
use crate::nn::optim::{adamw_step, cosine_lr, AdamConfig, OptimizerState};
use crate::nn::params::ParamStore;
use crate::nn::LOG_FLOOR;
use crate::tensor::Tensor;
use crate::texture::{extract_patches, PatchSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Optimizer steps per epoch; defaults to the training tile count.
    pub steps_per_epoch: Option<usize>,
    pub seed: u64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub augment: AugmentConfig,
    pub adam: AdamConfig,
    pub tiles_per_batch: usize,
    /// Validate every this many epochs; the final epoch is always validated.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            steps_per_epoch: None,
            seed: 0,
            lr_max: 1e-4,
            lr_min: 1e-6,
            augment: AugmentConfig::default(),
            adam: AdamConfig::default(),
            tiles_per_batch: 1,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr_max > self.lr_min && self.lr_min > 0.0) {
            return bad("learning rates must satisfy lr_max > lr_min > 0");
        }
        if self.tiles_per_batch == 0 || self.eval_every == 0 || self.steps_per_epoch == Some(0) {
            return bad("tiles per batch, validation cadence and steps per epoch must be positive");
        }
        self.augment.validate()
    }
}

/// Cacheable per-tile features computed from the un-augmented normalized mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileFeatures {
    /// `faces × 16`.
    pub descriptors: Tensor,
    pub patches: PatchSet,
    pub clusters: ClusterAssignment,
}

impl TileFeatures {
    pub fn compute(mesh: &Mesh, config: &ModelConfig, seed: u64) -> Result<Self> {
        let vertices = normalize_vertices(&mesh.vertices)?;
        let adjacency = Adjacency::new(&mesh.faces);
        let descriptors = descriptors_tensor(&vertices, &mesh.faces, &adjacency)?;
        let patches = PatchSet::from_patches(&extract_patches(mesh, config.pixels_per_face)?)?;
        let clusters = cluster_mesh(&vertices, &mesh.faces, config.clusters, seed)?;
        Ok(Self {
            descriptors,
            patches,
            clusters,
        })
    }
}

fn descriptors_tensor(vertices: &[[f64; 3]], faces: &[[usize; 3]], adjacency: &Adjacency) -> Result<Tensor> {
    let d = face_descriptors(vertices, faces, adjacency);
    Tensor::new(vec![faces.len(), DESCRIPTOR_LEN], descriptor_matrix(&d))
}

/// A tile ready for training or inference.
#[derive(Debug, Clone)]
pub struct PreparedTile {
    pub name: String,
    /// Normalized vertex positions.
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub adjacency: Adjacency,
    pub labels: Vec<Label>,
    /// Face areas in the original mesh units.
    pub areas: Vec<f64>,
    pub features: TileFeatures,
    pub layout: BatchLayout,
}

impl PreparedTile {
    pub fn prepare(name: impl Into<String>, mesh: &Mesh, config: &ModelConfig, seed: u64) -> Result<Self> {
        let features = TileFeatures::compute(mesh, config, seed)?;
        Self::from_features(name, mesh, features)
    }

    /// Reassembles a tile around previously computed features.
    pub fn from_features(name: impl Into<String>, mesh: &Mesh, features: TileFeatures) -> Result<Self> {
        let f = mesh.face_count();
        if features.descriptors.rows() != f || features.patches.face_count() != f || features.clusters.face_cluster.len() != f {
            return Err(Error::ConfigMismatch(format!("cached features do not describe a {f}-face mesh")));
        }
        let layout = BatchLayout::new(&features.clusters.face_cluster, features.clusters.k)?;
        Ok(Self {
            name: name.into(),
            vertices: normalize_vertices(&mesh.vertices)?,
            faces: mesh.faces.clone(),
            adjacency: Adjacency::new(&mesh.faces),
            labels: mesh.labels.clone().unwrap_or_else(|| vec![None; f]),
            areas: mesh.face_areas(),
            features,
            layout,
        })
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn input(&self) -> ModelInput<'_> {
        self.input_with(&self.features.descriptors)
    }

    pub fn input_with<'a>(&'a self, descriptors: &'a Tensor) -> ModelInput<'a> {
        ModelInput {
            descriptors,
            patches: &self.features.patches,
            layout: &self.layout,
        }
    }

    /// Descriptors of a randomly augmented copy of the normalized geometry.
    pub fn augmented_descriptors<R: Rng + ?Sized>(&self, config: &AugmentConfig, rng: &mut R) -> Result<Tensor> {
        if !(config.rotate || config.scale || config.noise) {
            return Ok(self.features.descriptors.clone());
        }
        let v = augment_vertices(&self.vertices, config, rng);
        descriptors_tensor(&v, &self.faces, &self.adjacency)
    }
}

/// Masked mean cross-entropy of `probs` against `labels`.
pub fn minibatch_loss(probs: &Tensor, labels: &[Label]) -> Result<f64> {
    let mut g = Graph::new();
    let p = g.leaf(probs.clone())?;
    let l = g.cross_entropy(p, labels.to_vec(), LOG_FLOOR)?;
    Ok(g.value(l).data()[0])
}

pub fn predict_tile(model: &Model, tile: &PreparedTile) -> Result<Prediction> {
    model.predict(&tile.input())
}

/// Pooled metrics over all labeled faces of `tiles`.
pub fn evaluate_tiles(model: &Model, tiles: &[PreparedTile]) -> Result<MetricsReport> {
    let mut tally = Tally::new(model.config().classes);
    for tile in tiles {
        let pred = predict_tile(model, tile)?;
        tally.add(&pred.labels, &tile.labels, &tile.areas)?;
    }
    tally.report()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    /// `None` when every drawn tile was unlabeled and the step was skipped.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub epoch: usize,
    pub step: usize,
    pub mf1: f64,
    pub oa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSnapshot {
    pub epoch: usize,
    pub mf1: f64,
    pub params: ParamStore,
}

/// Everything needed to continue training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: ParamStore,
    pub optimizer: OptimizerState,
    /// Index of the next optimizer step.
    pub step: usize,
    pub history: Vec<StepRecord>,
    pub validations: Vec<ValidationRecord>,
    pub best: Option<BestSnapshot>,
}

pub struct Trainer<'a> {
    model: Model,
    optimizer: OptimizerState,
    config: TrainConfig,
    train: &'a [PreparedTile],
    val: &'a [PreparedTile],
    steps_per_epoch: usize,
    step: usize,
    history: Vec<StepRecord>,
    validations: Vec<ValidationRecord>,
    best: Option<BestSnapshot>,
}

/// Random source of optimizer step `step`.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64 + 2);
    rng
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, config: TrainConfig, train: &'a [PreparedTile], val: &'a [PreparedTile]) -> Result<Self> {
        let optimizer = OptimizerState::new(model.store(), config.adam);
        Self::assemble(model, optimizer, config, train, val, 0)
    }

    pub fn resume(state: TrainState, train: &'a [PreparedTile], val: &'a [PreparedTile]) -> Result<Self> {
        let model = Model::from_store(state.model, &state.params)?;
        if state.optimizer.first.len() != model.store().len() {
            return Err(Error::ConfigMismatch("optimizer state does not match the parameters".into()));
        }
        let mut t = Self::assemble(model, state.optimizer, state.train, train, val, state.step)?;
        t.history = state.history;
        t.validations = state.validations;
        t.best = state.best;
        Ok(t)
    }

    fn assemble(
        model: Model,
        optimizer: OptimizerState,
        config: TrainConfig,
        train: &'a [PreparedTile],
        val: &'a [PreparedTile],
        step: usize,
    ) -> Result<Self> {
        config.validate()?;
        if train.iter().all(|t| t.labeled_count() == 0) {
            return Err(Error::NoLabels);
        }
        if val.is_empty() {
            return Err(Error::InvalidArgument("validation set is empty".into()));
        }
        if val.iter().all(|t| t.labeled_count() == 0) {
            return Err(Error::NoLabels);
        }
        let steps_per_epoch = config.steps_per_epoch.unwrap_or(train.len());
        Ok(Self {
            model,
            optimizer,
            config,
            train,
            val,
            steps_per_epoch,
            step,
            history: Vec::new(),
            validations: Vec::new(),
            best: None,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.config.epochs * self.steps_per_epoch
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.steps_per_epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn validations(&self) -> &[ValidationRecord] {
        &self.validations
    }

    pub fn best(&self) -> Option<&BestSnapshot> {
        self.best.as_ref()
    }

    /// The best-validation model, or the current one before any validation.
    pub fn best_model(&self) -> Result<Model> {
        let store = self.best.as_ref().map_or(self.model.store(), |b| &b.params);
        Model::from_store(self.model.config().clone(), store)
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            model: self.model.config().clone(),
            train: self.config.clone(),
            params: self.model.store().clone(),
            optimizer: self.optimizer.clone(),
            step: self.step,
            history: self.history.clone(),
            validations: self.validations.clone(),
            best: self.best.clone(),
        }
    }

    /// One optimizer step, followed by validation at epoch boundaries.
    pub fn step(&mut self) -> Result<StepRecord> {
        if self.is_finished() {
            return Err(Error::InvalidArgument("training already finished".into()));
        }
        let step = self.step;
        let lr = cosine_lr(step, self.total_steps(), self.config.lr_max, self.config.lr_min)?;
        let mut rng = step_rng(self.config.seed, step);
        let mut sum: Option<Vec<Tensor>> = None;
        let mut loss_sum = 0.0;
        let mut labeled = 0usize;
        for _ in 0..self.config.tiles_per_batch {
            let tile = &self.train[rng.random_range(0..self.train.len())];
            let m = tile.labeled_count();
            if m == 0 {
                log::warn!("tile {} has no labeled faces; skipped", tile.name);
                continue;
            }
            let descriptors = tile.augmented_descriptors(&self.config.augment, &mut rng)?;
            let mut g = Graph::new();
            let p = self.model.bind(&mut g)?;
            let mut dropout = self.model.dropout(&mut rng);
            let probs = self.model.forward(&mut g, &p, &tile.input_with(&descriptors), dropout.as_mut())?;
            let loss = g.cross_entropy(probs, tile.labels.clone(), LOG_FLOOR)?;
            let grads = self.model.store().collect_grads(&g.backward(loss)?);
            let w = m as f64;
            loss_sum += g.value(loss).data()[0] * w;
            labeled += m;
            match &mut sum {
                None => {
                    sum = Some(grads.into_iter().map(|t| scaled(t, w)).collect());
                }
                Some(acc) => {
                    for (a, t) in acc.iter_mut().zip(grads) {
                        for (x, y) in a.data_mut().iter_mut().zip(t.data()) {
                            *x += w * y;
                        }
                    }
                }
            }
        }
        let record = match sum {
            Some(acc) => {
                let total = labeled as f64;
                let grads: Vec<Tensor> = acc.into_iter().map(|t| scaled(t, 1.0 / total)).collect();
                adamw_step(self.model.store_mut(), &grads, &mut self.optimizer, lr)?;
                StepRecord {
                    step,
                    lr,
                    loss: Some(loss_sum / total),
                }
            }
            None => StepRecord { step, lr, loss: None },
        };
        self.history.push(record.clone());
        self.step += 1;
        if self.step.is_multiple_of(self.steps_per_epoch) {
            let epoch = self.step / self.steps_per_epoch;
            if epoch.is_multiple_of(self.config.eval_every) || self.is_finished() {
                self.validate(epoch)?;
            }
        }
        Ok(record)
    }

    fn validate(&mut self, epoch: usize) -> Result<()> {
        let report = evaluate_tiles(&self.model, self.val)?;
        log::info!("epoch {epoch}: validation mF1 {:.4}, OA {:.4}", report.mf1, report.oa);
        self.validations.push(ValidationRecord {
            epoch,
            step: self.step,
            mf1: report.mf1,
            oa: report.oa,
        });
        if self.best.as_ref().is_none_or(|b| report.mf1 > b.mf1) {
            self.best = Some(BestSnapshot {
                epoch,
                mf1: report.mf1,
                params: self.model.store().clone(),
            });
        }
        Ok(())
    }

    /// Runs at most `n` further steps.
    pub fn run_steps(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.is_finished() {
                break;
            }
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }
}

fn scaled(mut t: Tensor, s: f64) -> Tensor {
    t.data_mut().iter_mut().for_each(|x| *x *= s);
    t
}
