//! Tile lists, the per-tile feature cache and tile loading.
//!
//! A tile list has one tile per line, `mesh texture [labels]`, with paths
//! relative to the list file. Blank lines and `#` comments are ignored.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use texmesh_core::model::ModelConfig;
use texmesh_core::train::{PreparedTile, TileFeatures};
use texmesh_core::Mesh;

use crate::error::{Error, Result};
use crate::labels::load_labels;
use crate::obj::load_textured_mesh;

const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileSource {
    /// Mesh file stem; names cache entries and output files.
    pub name: String,
    pub mesh: PathBuf,
    pub texture: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl TileSource {
    pub fn new(mesh: PathBuf, texture: Option<PathBuf>, labels: Option<PathBuf>) -> Self {
        let name = mesh
            .file_stem()
            .map_or_else(|| "tile".to_string(), |s| s.to_string_lossy().into_owned());
        Self {
            name,
            mesh,
            texture,
            labels,
        }
    }

    fn texture_path(&self) -> Result<&Path> {
        self.texture
            .as_deref()
            .ok_or_else(|| Error::Config("no texture image given".into()).in_tile(&self.name))
    }

    pub fn load_mesh(&self, classes: usize, with_labels: bool) -> Result<Mesh> {
        let run = || -> Result<Mesh> {
            let mesh = load_textured_mesh(&self.mesh, self.texture_path()?)?;
            if !with_labels {
                return Ok(mesh);
            }
            let Some(path) = &self.labels else {
                return Err(Error::Config("no label file given".into()));
            };
            let labels = load_labels(path, mesh.face_count(), classes)?;
            Ok(mesh.with_labels(labels)?)
        };
        run().map_err(|e| match e {
            Error::Tile { .. } => e,
            e => e.in_tile(&self.name),
        })
    }
}

pub fn parse_tile_list(text: &str, base: &Path, path: &Path) -> Result<Vec<TileSource>> {
    let mut out: Vec<TileSource> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<PathBuf> = line.split_whitespace().map(|p| base.join(p)).collect();
        if parts.len() > 3 {
            return Err(Error::parse(path, n + 1, "expected `mesh texture [labels]`"));
        }
        let mut it = parts.into_iter();
        let tile = TileSource::new(it.next().expect("non-empty line"), it.next(), it.next());
        if out.iter().any(|t| t.name == tile.name) {
            return Err(Error::parse(path, n + 1, format!("duplicate tile name {:?}", tile.name)));
        }
        out.push(tile);
    }
    Ok(out)
}

pub fn load_tile_list(path: &Path) -> Result<Vec<TileSource>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tile_list(&text, path.parent().unwrap_or(Path::new("")), path)
}

/// Content-addressed store of [`TileFeatures`].
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

/// What happened to a tile during [`FeatureCache::features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Computed,
}

fn hash_file(h: &mut Sha256, path: &Path) -> Result<()> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(&bytes);
    Ok(())
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Entry path; the key covers the input file contents and every setting
    /// the features depend on.
    pub fn entry(&self, tile: &TileSource, config: &ModelConfig, seed: u64) -> Result<PathBuf> {
        let mut h = Sha256::new();
        h.update(CACHE_VERSION.to_le_bytes());
        hash_file(&mut h, &tile.mesh)?;
        hash_file(&mut h, tile.texture_path()?)?;
        for v in [config.pixels_per_face as u64, config.clusters as u64, seed] {
            h.update(v.to_le_bytes());
        }
        let digest = h.finalize();
        let hex: String = digest[..12].iter().map(|b| format!("{b:02x}")).collect();
        Ok(self.dir.join(format!("{}-{hex}.json", tile.name)))
    }

    /// Cached features for `mesh`, computing and storing them on a miss.
    pub fn features(&self, tile: &TileSource, mesh: &Mesh, config: &ModelConfig, seed: u64) -> Result<(TileFeatures, CacheOutcome)> {
        let path = self.entry(tile, config, seed).map_err(|e| e.in_tile(&tile.name))?;
        if let Ok(file) = fs::File::open(&path) {
            match serde_json::from_reader::<_, TileFeatures>(BufReader::new(file)) {
                Ok(f) if f.descriptors.rows() == mesh.face_count() => return Ok((f, CacheOutcome::Hit)),
                _ => log::warn!("ignoring unreadable cache entry {}", path.display()),
            }
        }
        let features = TileFeatures::compute(mesh, config, seed).map_err(|e| Error::from(e).in_tile(&tile.name))?;
        self.store(&path, &features)?;
        Ok((features, CacheOutcome::Computed))
    }

    fn store(&self, path: &Path, features: &TileFeatures) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let tmp = path.with_extension("json.tmp");
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, features).map_err(|source| Error::Json {
            path: tmp.clone(),
            source,
        })?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        drop(w);
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

/// Loads a tile and its features (through `cache` when given).
pub fn prepare_tile(
    tile: &TileSource,
    config: &ModelConfig,
    seed: u64,
    with_labels: bool,
    cache: Option<&FeatureCache>,
) -> Result<(PreparedTile, CacheOutcome)> {
    let mesh = tile.load_mesh(config.classes, with_labels)?;
    let (features, outcome) = match cache {
        Some(c) => c.features(tile, &mesh, config, seed)?,
        None => (
            TileFeatures::compute(&mesh, config, seed).map_err(|e| Error::from(e).in_tile(&tile.name))?,
            CacheOutcome::Computed,
        ),
    };
    let prepared = PreparedTile::from_features(&tile.name, &mesh, features).map_err(|e| Error::from(e).in_tile(&tile.name))?;
    Ok((prepared, outcome))
}
