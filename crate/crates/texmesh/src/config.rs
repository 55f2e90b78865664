//! Flat TOML run configuration. Every key is optional; an empty file gives
//! the default architecture and schedule.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use texmesh_core::geometry::AugmentConfig;
use texmesh_core::model::{GlobalMode, Modality, ModelConfig};
use texmesh_core::nn::optim::AdamConfig;
use texmesh_core::train::TrainConfig;

use crate::error::{Error, Result};

pub const OUTPUT_DIR_ENV: &str = "TEXMESH_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModalityArg {
    Geometry,
    Texture,
    Both,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Geometry => Modality::Geometry,
            ModalityArg::Texture => Modality::Texture,
            ModalityArg::Both => Modality::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GlobalModeArg {
    /// Self-attention over cluster tokens.
    Sa,
    /// Cluster-token block followed by face-to-cluster cross-attention.
    Ca,
    /// No global stage.
    None,
}

impl From<GlobalModeArg> for GlobalMode {
    fn from(m: GlobalModeArg) -> Self {
        match m {
            GlobalModeArg::Sa => GlobalMode::SelfAttention,
            GlobalModeArg::Ca => GlobalMode::CrossAttention,
            GlobalModeArg::None => GlobalMode::Disabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    pub classes: usize,
    pub embed_dim: usize,
    pub face_dim: usize,
    pub blocks: usize,
    pub heads: usize,
    pub pixels_per_face: usize,
    pub clusters: usize,
    pub modality: ModalityArg,
    pub global_mode: GlobalModeArg,
    pub dropout: f64,

    pub epochs: usize,
    pub steps_per_epoch: Option<usize>,
    pub lr_max: f64,
    pub lr_min: f64,
    pub tiles_per_batch: usize,
    pub eval_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,

    pub augment: bool,
    pub rotate: bool,
    pub scale: bool,
    pub noise: bool,
    pub max_rotation_deg: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub noise_sigma: f64,

    /// Tile list files; relative paths resolve against the config file.
    pub train_tiles: Option<PathBuf>,
    pub val_tiles: Option<PathBuf>,
    pub test_tiles: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub palette: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let a = AugmentConfig::default();
        Self {
            seed: t.seed,
            classes: m.classes,
            embed_dim: m.embed_dim,
            face_dim: m.face_dim,
            blocks: m.blocks,
            heads: m.heads,
            pixels_per_face: m.pixels_per_face,
            clusters: m.clusters,
            modality: ModalityArg::Both,
            global_mode: GlobalModeArg::Sa,
            dropout: m.dropout,
            epochs: t.epochs,
            steps_per_epoch: t.steps_per_epoch,
            lr_max: t.lr_max,
            lr_min: t.lr_min,
            tiles_per_batch: t.tiles_per_batch,
            eval_every: t.eval_every,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            adam_eps: t.adam.eps,
            weight_decay: t.adam.weight_decay,
            augment: true,
            rotate: a.rotate,
            scale: a.scale,
            noise: a.noise,
            max_rotation_deg: a.max_rotation.to_degrees(),
            scale_min: a.scale_min,
            scale_max: a.scale_max,
            noise_sigma: a.noise_sigma,
            train_tiles: None,
            val_tiles: None,
            test_tiles: None,
            output_dir: PathBuf::from("output"),
            cache_dir: None,
            palette: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| Error::Toml {
            path: path.into(),
            source,
        })
    }

    /// Reads `path` and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.train_tiles, &mut self.val_tiles, &mut self.test_tiles, &mut self.cache_dir, &mut self.palette]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    /// Applies the output-directory environment override, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            face_dim: self.face_dim,
            blocks: self.blocks,
            heads: self.heads,
            classes: self.classes,
            pixels_per_face: self.pixels_per_face,
            clusters: self.clusters,
            modality: self.modality.into(),
            global_mode: self.global_mode.into(),
            dropout: self.dropout,
        }
    }

    pub fn augmentation(&self) -> AugmentConfig {
        AugmentConfig {
            max_rotation: self.max_rotation_deg.to_radians(),
            scale_min: self.scale_min,
            scale_max: self.scale_max,
            noise_sigma: self.noise_sigma,
            rotate: self.augment && self.rotate,
            scale: self.augment && self.scale,
            noise: self.augment && self.noise,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            steps_per_epoch: self.steps_per_epoch,
            seed: self.seed,
            lr_max: self.lr_max,
            lr_min: self.lr_min,
            augment: self.augmentation(),
            adam: AdamConfig {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
                weight_decay: self.weight_decay,
            },
            tiles_per_batch: self.tiles_per_batch,
            eval_every: self.eval_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.train().validate()?;
        Ok(())
    }
}
