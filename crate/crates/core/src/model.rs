//! The segmentation network.
//!
//! Per face, a linear geometry branch and a texture branch (a transformer
//! block over the face's pixels plus a learnable texture token) are fused
//! by a two-layer MLP into an `N_F`-wide face token. Face tokens are laid
//! out per cluster behind a shared learnable cluster token and run through
//! a stack of two-stage blocks: self-attention inside each cluster, then
//! self-attention among the cluster tokens. A linear head and softmax give
//! per-face class scores.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{BatchLayout, Slot};
use crate::error::{shape_err, Error, Result};
use crate::geometry::DESCRIPTOR_LEN;
use crate::nn::graph::{AttentionShape, Graph, Var};
use crate::nn::init::glorot_init;
use crate::nn::layers::{self, bind_linear, bind_params, BlockParams, Dropout, Linear};
use crate::nn::params::{ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::texture::{PatchSet, CHANNELS};

/// Which feature branches feed the fusion MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Geometry,
    Texture,
    Both,
}

/// Second stage of each two-stage block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlobalMode {
    /// Transformer block over the K cluster tokens.
    SelfAttention,
    /// Simplified cross-attention variant: the cluster-token block, then
    /// every face token adds cross-attention over all cluster tokens.
    CrossAttention,
    /// No second stage; clusters never exchange information.
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width `d` of the geometry and texture embeddings.
    pub embed_dim: usize,
    /// Width `N_F` of face and cluster tokens.
    pub face_dim: usize,
    pub blocks: usize,
    pub heads: usize,
    pub classes: usize,
    /// Pixels per face `P`.
    pub pixels_per_face: usize,
    /// Cluster count `K`.
    pub clusters: usize,
    pub modality: Modality,
    pub global_mode: GlobalMode,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            face_dim: 256,
            blocks: 6,
            heads: 2,
            classes: 6,
            pixels_per_face: 128,
            clusters: 300,
            modality: Modality::Both,
            global_mode: GlobalMode::SelfAttention,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.embed_dim == 0 || self.face_dim == 0 {
            return bad("embedding widths must be positive");
        }
        if self.heads == 0 || !self.face_dim.is_multiple_of(self.heads) || !self.embed_dim.is_multiple_of(self.heads) {
            return bad("embedding widths must be divisible by the head count");
        }
        if self.blocks == 0 {
            return bad("at least one block is required");
        }
        if self.classes == 0 {
            return bad("at least one class is required");
        }
        if self.pixels_per_face == 0 || self.clusters == 0 {
            return bad("pixels per face and cluster count must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Cross-attention weights of the simplified C-A stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossParams<T = ParamId> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub output: Linear<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageParams<T = ParamId> {
    pub local: BlockParams<T>,
    pub global: BlockParams<T>,
    pub cross: Option<CrossParams<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = ParamId> {
    pub geometry: Linear<T>,
    /// `1 × Ch`.
    pub texture_token: T,
    pub texture_in: Linear<T>,
    pub texture_block: BlockParams<T>,
    pub fusion_in: Linear<T>,
    pub fusion_out: Linear<T>,
    /// `1 × N_F`.
    pub cluster_token: T,
    pub stages: Vec<StageParams<T>>,
    pub head: Linear<T>,
}

/// Per-tile inputs of a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    /// `faces × 16` geometry descriptors.
    pub descriptors: &'a Tensor,
    pub patches: &'a PatchSet,
    pub layout: &'a BatchLayout,
}

impl ModelInput<'_> {
    pub fn face_count(&self) -> usize {
        self.descriptors.rows()
    }

    fn check(&self) -> Result<()> {
        let f = self.face_count();
        if self.descriptors.cols() != DESCRIPTOR_LEN {
            return Err(shape_err("model input", "descriptors need 16 columns"));
        }
        if self.patches.face_count() != f || self.layout.face_count() != f {
            return Err(shape_err(
                "model input",
                format!(
                    "{} descriptor rows, {} patches, {} laid-out faces",
                    f,
                    self.patches.face_count(),
                    self.layout.face_count()
                ),
            ));
        }
        Ok(())
    }
}

/// Normalized class scores and argmax labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `faces × C`, rows sum to one.
    pub scores: Tensor,
    pub labels: Vec<usize>,
}

impl Prediction {
    pub fn from_scores(scores: Tensor) -> Self {
        let labels = (0..scores.rows()).map(|r| argmax(scores.row(r))).collect();
        Self { scores, labels }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    params: ModelParams<ParamId>,
}

fn token(store: &mut ParamStore, name: &str, width: usize, rng: &mut ChaCha8Rng) -> Result<ParamId> {
    let t = glorot_init(1, width, rng)?;
    Ok(store.add(name, t))
}

impl Model {
    /// Glorot-initialized model; weights depend only on `config` and `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (d, nf) = (config.embed_dim, config.face_dim);
        let geometry = Linear::register(Linear::glorot(DESCRIPTOR_LEN, d, &mut rng)?, &mut store, "geometry");
        let texture_token = token(&mut store, "texture.token", CHANNELS, &mut rng)?;
        let texture_in = Linear::register(Linear::glorot(CHANNELS, d, &mut rng)?, &mut store, "texture.input");
        let texture_block = BlockParams::glorot(d, 2 * d, &mut rng)?.register(&mut store, "texture.block");
        let fusion_in = Linear::register(Linear::glorot(2 * d, nf, &mut rng)?, &mut store, "fusion.0");
        let fusion_out = Linear::register(Linear::glorot(nf, nf, &mut rng)?, &mut store, "fusion.1");
        let cluster_token = token(&mut store, "cluster.token", nf, &mut rng)?;
        let mut stages = Vec::with_capacity(config.blocks);
        for j in 0..config.blocks {
            let local = BlockParams::glorot(nf, 2 * nf, &mut rng)?.register(&mut store, &format!("stage{j}.local"));
            let global = BlockParams::glorot(nf, 2 * nf, &mut rng)?.register(&mut store, &format!("stage{j}.global"));
            let cross = if config.global_mode == GlobalMode::CrossAttention {
                let mut lin = |name: &str| -> Result<Linear<ParamId>> {
                    Ok(Linear::register(Linear::glorot(nf, nf, &mut rng)?, &mut store, &format!("stage{j}.cross.{name}")))
                };
                Some(CrossParams {
                    query: lin("query")?,
                    key: lin("key")?,
                    value: lin("value")?,
                    output: lin("output")?,
                })
            } else {
                None
            };
            stages.push(StageParams { local, global, cross });
        }
        let head = Linear::register(Linear::glorot(nf, config.classes, &mut rng)?, &mut store, "head");
        let params = ModelParams {
            geometry,
            texture_token,
            texture_in,
            texture_block,
            fusion_in,
            fusion_out,
            cluster_token,
            stages,
            head,
        };
        Ok(Self { config, store, params })
    }

    /// Rebuilds a model around previously saved parameter values.
    pub fn from_store(config: ModelConfig, store: &ParamStore) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        model.store.load_from(store)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn param_ids(&self) -> &ModelParams<ParamId> {
        &self.params
    }

    /// Places every parameter on the tape.
    pub fn bind(&self, g: &mut Graph) -> Result<ModelParams<Var>> {
        let s = &self.store;
        let p = &self.params;
        let mut stages = Vec::with_capacity(p.stages.len());
        for st in &p.stages {
            let cross = match &st.cross {
                Some(c) => Some(CrossParams {
                    query: bind_linear(g, s, &c.query)?,
                    key: bind_linear(g, s, &c.key)?,
                    value: bind_linear(g, s, &c.value)?,
                    output: bind_linear(g, s, &c.output)?,
                }),
                None => None,
            };
            stages.push(StageParams {
                local: bind_params(g, s, &st.local)?,
                global: bind_params(g, s, &st.global)?,
                cross,
            });
        }
        Ok(ModelParams {
            geometry: bind_linear(g, s, &p.geometry)?,
            texture_token: s.bind(g, p.texture_token)?,
            texture_in: bind_linear(g, s, &p.texture_in)?,
            texture_block: bind_params(g, s, &p.texture_block)?,
            fusion_in: bind_linear(g, s, &p.fusion_in)?,
            fusion_out: bind_linear(g, s, &p.fusion_out)?,
            cluster_token: s.bind(g, p.cluster_token)?,
            stages,
            head: bind_linear(g, s, &p.head)?,
        })
    }

    /// Texture feature `F_T` of every face: the texture token's row after
    /// one transformer block over `[pixels; token]`.
    pub fn texture_branch(
        &self,
        g: &mut Graph,
        p: &ModelParams<Var>,
        patches: &PatchSet,
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let faces = patches.face_count();
        let per = patches.per_face;
        if let Some(face) = (0..faces).find(|f| !patches.mask[f * per..(f + 1) * per].iter().any(|m| *m)) {
            return Err(Error::EmptyPatch { face });
        }
        let len = per + 1;
        let pixels = g.leaf(patches.pixels.clone())?;
        let all = g.concat_rows(&[pixels, p.texture_token])?;
        let token_row = faces * per;
        let mut rows = Vec::with_capacity(faces * len);
        let mut key_mask = Vec::with_capacity(faces * len);
        for f in 0..faces {
            rows.extend((f * per..(f + 1) * per).map(Some));
            rows.push(Some(token_row));
            key_mask.extend_from_slice(&patches.mask[f * per..(f + 1) * per]);
            key_mask.push(true);
        }
        let seq = g.gather(all, rows)?;
        let emb = layers::linear(g, seq, &p.texture_in)?;
        // Only the token row is kept, so only it needs to be a query.
        let queries = g.gather(emb, (0..faces).map(|f| Some(f * len + per)).collect())?;
        let shape = AttentionShape {
            batch: faces,
            query_len: 1,
            key_len: len,
            heads: self.config.heads,
        };
        layers::block(g, queries, emb, shape, key_mask, vec![true; faces], &p.texture_block, dropout)
    }

    /// Fused face tokens, `faces × N_F`.
    pub fn face_features(
        &self,
        g: &mut Graph,
        p: &ModelParams<Var>,
        descriptors: &Tensor,
        patches: &PatchSet,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let faces = descriptors.rows();
        let d = self.config.embed_dim;
        let fg = match self.config.modality {
            Modality::Texture => g.leaf(Tensor::zeros(&[faces, d]))?,
            _ => {
                let x = g.leaf(descriptors.clone())?;
                layers::linear(g, x, &p.geometry)?
            }
        };
        let ft = match self.config.modality {
            Modality::Geometry => g.leaf(Tensor::zeros(&[faces, d]))?,
            _ => self.texture_branch(g, p, patches, dropout.as_deref_mut())?,
        };
        let f = g.concat_cols(fg, ft)?;
        layers::mlp(g, f, &p.fusion_in, &p.fusion_out, dropout)
    }

    /// Cluster batch `X`: `(K·L) × N_F` rows following `layout`.
    pub fn assemble(&self, g: &mut Graph, p: &ModelParams<Var>, features: Var, layout: &BatchLayout) -> Result<Var> {
        let all = g.concat_rows(&[features, p.cluster_token])?;
        g.gather(all, layout.assembly_rows())
    }

    /// One two-stage block.
    pub fn stage(
        &self,
        g: &mut Graph,
        stage: &StageParams<Var>,
        x: Var,
        layout: &BatchLayout,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let heads = self.config.heads;
        let k = layout.clusters();
        let mask = layout.mask();
        let z = layers::self_block(g, x, k, heads, mask.clone(), &stage.local, dropout.as_deref_mut())?;
        let z = g.mask_rows(z, mask)?;
        if self.config.global_mode == GlobalMode::Disabled {
            return Ok(z);
        }
        let tokens = g.gather(z, layout.token_rows().into_iter().map(Some).collect())?;
        let t = layers::self_block(g, tokens, 1, heads, vec![true; k], &stage.global, dropout)?;
        let both = g.concat_rows(&[z, t])?;
        let base = layout.clusters() * layout.seq_len();
        let rows = layout
            .slots()
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                Slot::Token => Some(base + i / layout.seq_len()),
                _ => Some(i),
            })
            .collect();
        let z = g.gather(both, rows)?;
        match (&self.config.global_mode, &stage.cross) {
            (GlobalMode::CrossAttention, Some(c)) => {
                let q = layers::linear(g, z, &c.query)?;
                let kk = layers::linear(g, t, &c.key)?;
                let v = layers::linear(g, t, &c.value)?;
                let shape = AttentionShape {
                    batch: 1,
                    query_len: base,
                    key_len: k,
                    heads,
                };
                let face_mask = layout.face_mask();
                let a = g.attention(q, kk, v, shape, vec![true; k], face_mask.clone())?;
                let o = layers::linear(g, a, &c.output)?;
                let o = g.mask_rows(o, face_mask)?;
                g.add(z, o)
            }
            (GlobalMode::CrossAttention, None) => Err(Error::ConfigMismatch("cross-attention stage has no weights".into())),
            _ => Ok(z),
        }
    }

    /// Blocks, face extraction, head and softmax on an assembled batch.
    pub fn forward_batch(
        &self,
        g: &mut Graph,
        p: &ModelParams<Var>,
        x: Var,
        layout: &BatchLayout,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        if g.value(x).rows() != layout.clusters() * layout.seq_len() {
            return Err(shape_err("forward_batch", "batch rows disagree with layout"));
        }
        let mut z = x;
        for stage in &p.stages {
            z = self.stage(g, stage, z, layout, dropout.as_deref_mut())?;
        }
        let zf = g.gather(z, layout.face_rows())?;
        let logits = layers::linear(g, zf, &p.head)?;
        g.softmax(logits)
    }

    /// Full forward pass; returns the `faces × C` probability node.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &ModelParams<Var>,
        input: &ModelInput<'_>,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        input.check()?;
        let features = self.face_features(g, p, input.descriptors, input.patches, dropout.as_deref_mut())?;
        let x = self.assemble(g, p, features, input.layout)?;
        self.forward_batch(g, p, x, input.layout, dropout)
    }

    /// Inference: no dropout.
    pub fn predict(&self, input: &ModelInput<'_>) -> Result<Prediction> {
        let mut g = Graph::new();
        let p = self.bind(&mut g)?;
        let probs = self.forward(&mut g, &p, input, None)?;
        Ok(Prediction::from_scores(g.value(probs).clone()))
    }

    /// Dropout source for training, if the configured rate is non-zero.
    pub fn dropout<'r>(&self, rng: &'r mut dyn rand::RngCore) -> Option<Dropout<'r>> {
        (self.config.dropout > 0.0).then_some(Dropout {
            rate: self.config.dropout,
            rng,
        })
    }
}
