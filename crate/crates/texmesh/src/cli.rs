//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, TrainOptions, BEST_CHECKPOINT};
use crate::config::{GlobalModeArg, ModalityArg, RunConfig};
use crate::dataset::{load_tile_list, TileSource};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "texmesh", version, about = "Semantic segmentation of textured triangle meshes")]
pub struct Cli {
    /// Run configuration (flat TOML); defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub modality: Option<ModalityArg>,
    #[arg(long, global = true, value_enum)]
    pub global_mode: Option<GlobalModeArg>,
    #[arg(long, global = true)]
    pub k_clusters: Option<usize>,
    #[arg(long, global = true)]
    pub blocks: Option<usize>,
    #[arg(long, global = true)]
    pub embed_dim: Option<usize>,
    /// Class palette file (`name r g b` per line).
    #[arg(long, global = true)]
    pub palette: Option<PathBuf>,
    /// Output directory; overrides the config file and TEXMESH_OUTPUT_DIR.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute and cache per-tile features for every configured tile list.
    Preprocess,
    /// Train, writing last.json, best.json, history.csv and validation.csv.
    Train {
        /// Continue from last.json in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many optimizer steps.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Write per-face class scores as CSV.
    Predict(RunArgs),
    /// Per-class F1, mF1 and OA (plain and area-weighted) on labeled tiles.
    Evaluate(RunArgs),
    /// Write class-colored meshes and score CSVs.
    Export(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Defaults to best.json in the output directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, requires = "texture", conflicts_with = "tiles")]
    pub mesh: Option<PathBuf>,
    #[arg(long, requires = "mesh")]
    pub texture: Option<PathBuf>,
    #[arg(long, requires = "mesh")]
    pub labels: Option<PathBuf>,
    /// Tile list; defaults to the configured test tiles.
    #[arg(long)]
    pub tiles: Option<PathBuf>,
    /// Defaults to the output directory (predictions/ and export/ below it).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    /// Config file, then environment, then flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_env();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.modality {
            cfg.modality = v;
        }
        if let Some(v) = self.global_mode {
            cfg.global_mode = v;
        }
        if let Some(v) = self.k_clusters {
            cfg.clusters = v;
        }
        if let Some(v) = self.blocks {
            cfg.blocks = v;
        }
        if let Some(v) = self.embed_dim {
            cfg.embed_dim = v;
        }
        if let Some(v) = &self.palette {
            cfg.palette = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunArgs {
    fn tiles(&self, cfg: &RunConfig) -> Result<Vec<TileSource>> {
        if let Some(mesh) = &self.mesh {
            return Ok(vec![TileSource::new(mesh.clone(), self.texture.clone(), self.labels.clone())]);
        }
        match self.tiles.as_ref().or(cfg.test_tiles.as_ref()) {
            Some(list) => load_tile_list(list),
            None => Err(Error::Config("no tiles given: use --mesh/--texture, --tiles or test_tiles".into())),
        }
    }

    fn checkpoint(&self, cfg: &RunConfig) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| cfg.output_dir.join(BEST_CHECKPOINT))
    }

    fn out(&self, cfg: &RunConfig, sub: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output_dir.join(sub))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    match &cli.command {
        Command::Preprocess => {
            let s = commands::preprocess(&cfg)?;
            println!(
                "{} tile(s) computed, {} reused from {}",
                s.computed.len(),
                s.reused.len(),
                cfg.cache_dir().display()
            );
        }
        Command::Train { resume, max_steps } => {
            let s = commands::train(
                &cfg,
                TrainOptions {
                    resume: *resume,
                    max_steps: *max_steps,
                },
            )?;
            let best = s.best_mf1.map_or_else(|| "none yet".to_string(), |m| format!("{m:.4}"));
            println!("{}/{} steps, best validation mF1 {best}", s.steps_done, s.total_steps);
        }
        Command::Predict(a) => {
            let files = commands::predict(&cfg, &a.checkpoint(&cfg), &a.tiles(&cfg)?, &a.out(&cfg, "predictions"))?;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Evaluate(a) => {
            let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let report = commands::evaluate(&cfg, &a.checkpoint(&cfg), &a.tiles(&cfg)?, &out)?;
            let names = commands::palette(&cfg).ok();
            print!("{}", crate::report::metrics_text(&report, names.as_ref()));
        }
        Command::Export(a) => {
            let files = commands::export(&cfg, &a.checkpoint(&cfg), &a.tiles(&cfg)?, &a.out(&cfg, "export"))?;
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}
