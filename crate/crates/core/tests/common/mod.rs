//! Straight-line reference implementation of the network on nested
//! `Vec`s, plus random fixtures. Shares no numeric code with the crate:
//! padding is never materialized, masked keys are skipped rather than
//! biased, and each cluster is processed as its own sequence.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use texmesh_core::cluster::BatchLayout;
use texmesh_core::model::{GlobalMode, Modality, Model, ModelConfig, ModelInput};
use texmesh_core::nn::ParamStore;
use texmesh_core::texture::{PatchSet, TexturePatch};
use texmesh_core::Tensor;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = b[0].len();
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().enumerate().map(|(k, x)| x * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub struct Lin {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Lin {
    pub fn load(store: &ParamStore, prefix: &str) -> Self {
        Self {
            w: to_mat(get(store, &format!("{prefix}.weight"))),
            b: get(store, &format!("{prefix}.bias")).data().to_vec(),
        }
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        matmul(x, &self.w)
            .into_iter()
            .map(|r| r.iter().zip(&self.b).map(|(a, b)| a + b).collect())
            .collect()
    }
}

pub fn get<'a>(store: &'a ParamStore, name: &str) -> &'a Tensor {
    let id = store.find(name).unwrap_or_else(|| panic!("no parameter {name}"));
    store.get(id)
}

pub fn relu(x: &Mat) -> Mat {
    x.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn layer_norm(x: &Mat, gamma: &[f64], beta: &[f64]) -> Mat {
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let s = (var + 1e-5).sqrt();
            r.iter().enumerate().map(|(i, v)| (v - mean) / s * gamma[i] + beta[i]).collect()
        })
        .collect()
}

pub fn softmax_row(r: &[f64]) -> Vec<f64> {
    let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Multi-head attention over the valid keys only.
pub fn mha(q: &Mat, k: &Mat, v: &Mat, heads: usize, key_mask: &[bool]) -> Mat {
    let width = q[0].len();
    let dh = width / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let valid: Vec<usize> = (0..k.len()).filter(|&j| key_mask[j]).collect();
    q.iter()
        .map(|qi| {
            let mut out = vec![0.0; width];
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let logits: Vec<f64> = valid
                    .iter()
                    .map(|&j| cols.clone().map(|c| qi[c] * k[j][c]).sum::<f64>() * scale)
                    .collect();
                let w = softmax_row(&logits);
                for (a, &j) in w.iter().zip(&valid) {
                    for c in cols.clone() {
                        out[c] += a * v[j][c];
                    }
                }
            }
            out
        })
        .collect()
}

pub struct Block {
    pub q: Lin,
    pub k: Lin,
    pub v: Lin,
    pub o: Lin,
    pub g1: Vec<f64>,
    pub b1: Vec<f64>,
    pub m1: Lin,
    pub m2: Lin,
    pub g2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Block {
    pub fn load(store: &ParamStore, prefix: &str) -> Self {
        let vec = |n: &str| get(store, &format!("{prefix}.{n}")).data().to_vec();
        Self {
            q: Lin::load(store, &format!("{prefix}.query")),
            k: Lin::load(store, &format!("{prefix}.key")),
            v: Lin::load(store, &format!("{prefix}.value")),
            o: Lin::load(store, &format!("{prefix}.output")),
            g1: vec("norm1.gamma"),
            b1: vec("norm1.beta"),
            m1: Lin::load(store, &format!("{prefix}.mlp_in")),
            m2: Lin::load(store, &format!("{prefix}.mlp_out")),
            g2: vec("norm2.gamma"),
            b2: vec("norm2.beta"),
        }
    }

    /// Post-norm transformer block over one sequence.
    pub fn apply(&self, x: &Mat, heads: usize, key_mask: &[bool]) -> Mat {
        let a = mha(&self.q.apply(x), &self.k.apply(x), &self.v.apply(x), heads, key_mask);
        let h = layer_norm(&add(x, &self.o.apply(&a)), &self.g1, &self.b1);
        let m = self.m2.apply(&relu(&self.m1.apply(&h)));
        layer_norm(&add(&h, &m), &self.g2, &self.b2)
    }
}

/// Texture feature of one face from its valid pixels only.
pub fn texture_feature(store: &ParamStore, heads: usize, valid_pixels: &[[f64; 3]]) -> Vec<f64> {
    let mut seq: Mat = valid_pixels.iter().map(|p| p.to_vec()).collect();
    seq.push(get(store, "texture.token").data().to_vec());
    let emb = Lin::load(store, "texture.input").apply(&seq);
    let out = Block::load(store, "texture.block").apply(&emb, heads, &vec![true; emb.len()]);
    out.last().unwrap().clone()
}

/// Reference scores, `faces × C`.
pub fn reference_forward(model: &Model, descriptors: &Tensor, patches: &PatchSet, members: &[Vec<usize>]) -> Mat {
    let cfg = model.config();
    let store = model.store();
    let faces = descriptors.rows();
    let d = cfg.embed_dim;
    let geo = Lin::load(store, "geometry");
    let fusion0 = Lin::load(store, "fusion.0");
    let fusion1 = Lin::load(store, "fusion.1");
    let mut features = Vec::with_capacity(faces);
    for f in 0..faces {
        let fg = if cfg.modality == Modality::Texture {
            vec![0.0; d]
        } else {
            geo.apply(&vec![descriptors.row(f).to_vec()]).remove(0)
        };
        let ft = if cfg.modality == Modality::Geometry {
            vec![0.0; d]
        } else {
            let p = patches.patch(f);
            let valid: Vec<[f64; 3]> = p.pixels.iter().zip(&p.mask).filter(|(_, m)| **m).map(|(x, _)| *x).collect();
            texture_feature(store, cfg.heads, &valid)
        };
        let cat = vec![[fg, ft].concat()];
        features.push(fusion1.apply(&relu(&fusion0.apply(&cat))).remove(0));
    }
    let token = get(store, "cluster.token").data().to_vec();
    let mut seqs: Vec<Mat> = members
        .iter()
        .map(|m| {
            let mut s = vec![token.clone()];
            s.extend(m.iter().map(|&f| features[f].clone()));
            s
        })
        .collect();
    for j in 0..cfg.blocks {
        let local = Block::load(store, &format!("stage{j}.local"));
        for s in seqs.iter_mut() {
            *s = local.apply(s, cfg.heads, &vec![true; s.len()]);
        }
        if cfg.global_mode == GlobalMode::Disabled {
            continue;
        }
        let tokens: Mat = seqs.iter().map(|s| s[0].clone()).collect();
        let global = Block::load(store, &format!("stage{j}.global"));
        let tokens = global.apply(&tokens, cfg.heads, &vec![true; tokens.len()]);
        for (s, t) in seqs.iter_mut().zip(&tokens) {
            s[0] = t.clone();
        }
        if cfg.global_mode == GlobalMode::CrossAttention {
            let pre = format!("stage{j}.cross");
            let q = Lin::load(store, &format!("{pre}.query"));
            let k = Lin::load(store, &format!("{pre}.key")).apply(&tokens);
            let v = Lin::load(store, &format!("{pre}.value")).apply(&tokens);
            let o = Lin::load(store, &format!("{pre}.output"));
            for s in seqs.iter_mut() {
                let faces_part: Mat = s[1..].to_vec();
                if faces_part.is_empty() {
                    continue;
                }
                let a = o.apply(&mha(&q.apply(&faces_part), &k, &v, cfg.heads, &vec![true; tokens.len()]));
                for (row, upd) in s[1..].iter_mut().zip(a) {
                    for (x, u) in row.iter_mut().zip(upd) {
                        *x += u;
                    }
                }
            }
        }
    }
    let head = Lin::load(store, "head");
    let mut out = vec![Vec::new(); faces];
    for (s, m) in seqs.iter().zip(members) {
        for (i, &f) in m.iter().enumerate() {
            out[f] = softmax_row(&head.apply(&vec![s[i + 1].clone()]).remove(0));
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// A random model with random inputs.
pub struct Fixture {
    pub model: Model,
    pub descriptors: Tensor,
    pub patches: PatchSet,
    pub members: Vec<Vec<usize>>,
    pub layout: BatchLayout,
}

impl Fixture {
    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            descriptors: &self.descriptors,
            patches: &self.patches,
            layout: &self.layout,
        }
    }
}

pub fn small_config(rng: &mut impl Rng) -> ModelConfig {
    let heads = rng.random_range(1..=2);
    ModelConfig {
        embed_dim: heads * rng.random_range(1..=4),
        face_dim: heads * rng.random_range(2..=8),
        blocks: rng.random_range(1..=2),
        heads,
        classes: rng.random_range(2..=4),
        pixels_per_face: rng.random_range(1..=6),
        clusters: rng.random_range(1..=3),
        modality: Modality::Both,
        global_mode: GlobalMode::SelfAttention,
        dropout: 0.1,
    }
}

pub fn random_patches(faces: usize, per_face: usize, rng: &mut impl Rng) -> PatchSet {
    let patches: Vec<TexturePatch> = (0..faces)
        .map(|_| {
            let valid = rng.random_range(1..=per_face);
            let mut pixels = vec![[0.0; 3]; per_face];
            for p in pixels.iter_mut().take(valid) {
                *p = [rng.random(), rng.random(), rng.random()];
            }
            let mut mask = vec![false; per_face];
            mask[..valid].fill(true);
            TexturePatch {
                pixels,
                mask,
                original_count: valid,
            }
        })
        .collect();
    PatchSet::from_patches(&patches).unwrap()
}

/// Random descriptors and patches, with faces spread over `config.clusters` clusters.
pub fn fixture(config: ModelConfig, faces: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::new(config.clone(), seed ^ 0x5eed).unwrap();
    let data = (0..faces * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let descriptors = Tensor::new(vec![faces, 16], data).unwrap();
    let patches = random_patches(faces, config.pixels_per_face, &mut rng);
    let k = config.clusters;
    let mut members = vec![Vec::new(); k];
    for f in 0..faces {
        let c = if f < k { f } else { rng.random_range(0..k) };
        members[c].push(f);
    }
    let layout = BatchLayout::from_members(&members, 0).unwrap();
    Fixture {
        model,
        descriptors,
        patches,
        members,
        layout,
    }
}

/// Reference scores of a fixture.
pub fn fixture_reference(fx: &Fixture) -> Mat {
    reference_forward(&fx.model, &fx.descriptors, &fx.patches, &fx.members)
}

/// One scalar's analytic and central-difference gradient.
#[derive(Debug, Clone)]
pub struct GradSample {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSample {
    pub fn rel_error(&self, floor: f64) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / scale
    }
}

pub const FD_STEP: f64 = 1e-4;

/// Random labels with roughly a quarter of faces unlabeled (at least one labeled).
pub fn random_labels(faces: usize, classes: usize, rng: &mut impl Rng) -> Vec<Option<usize>> {
    let mut labels: Vec<Option<usize>> = (0..faces)
        .map(|_| if rng.random_bool(0.25) { None } else { Some(rng.random_range(0..classes)) })
        .collect();
    labels[0] = Some(rng.random_range(0..classes));
    labels
}

/// Training loss with dropout masks drawn from a fixed seed, and its parameter gradients.
pub fn loss_and_grads(model: &Model, input: &ModelInput<'_>, labels: &[Option<usize>], dropout_seed: u64) -> (f64, Vec<Tensor>) {
    use texmesh_core::nn::{Dropout, Graph};
    let mut g = Graph::new();
    let p = model.bind(&mut g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let mut d = Dropout {
        rate: model.config().dropout,
        rng: &mut rng,
    };
    let probs = model.forward(&mut g, &p, input, Some(&mut d)).unwrap();
    let loss = g.cross_entropy(probs, labels.to_vec(), 1e-12).unwrap();
    let value = g.value(loss).data()[0];
    let grads = model.store().collect_grads(&g.backward(loss).unwrap());
    (value, grads)
}

/// Central differences for every scalar of every parameter.
pub fn gradient_check(fx: &mut Fixture, labels: &[Option<usize>], dropout_seed: u64) -> Vec<GradSample> {
    let (_, analytic) = loss_and_grads(&fx.model, &fx.input(), labels, dropout_seed);
    let mut out = Vec::new();
    let ids: Vec<_> = fx.model.store().ids().collect();
    for id in ids {
        let name = fx.model.store().name(id).to_string();
        for i in 0..fx.model.store().get(id).len() {
            let orig = fx.model.store().get(id).data()[i];
            fx.model.store_mut().get_mut(id).data_mut()[i] = orig + FD_STEP;
            let (up, _) = loss_and_grads(&fx.model, &fx.input(), labels, dropout_seed);
            fx.model.store_mut().get_mut(id).data_mut()[i] = orig - FD_STEP;
            let (down, _) = loss_and_grads(&fx.model, &fx.input(), labels, dropout_seed);
            fx.model.store_mut().get_mut(id).data_mut()[i] = orig;
            out.push(GradSample {
                param: name.clone(),
                index: i,
                analytic: analytic[id.0].data()[i],
                numeric: (up - down) / (2.0 * FD_STEP),
            });
        }
    }
    out
}

/// The randomized small configurations used for gradient checks.
pub fn gradient_configs() -> Vec<(ModelConfig, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let modes = [GlobalMode::SelfAttention, GlobalMode::CrossAttention, GlobalMode::Disabled];
    let modalities = [Modality::Both, Modality::Both, Modality::Geometry, Modality::Texture];
    (0..6)
        .map(|i| {
            let heads = rng.random_range(1..=2);
            let cfg = ModelConfig {
                embed_dim: heads * rng.random_range(2..=4),
                face_dim: heads * rng.random_range(3..=8),
                blocks: 2,
                heads,
                classes: rng.random_range(2..=4),
                pixels_per_face: rng.random_range(2..=6),
                clusters: rng.random_range(1..=3),
                modality: modalities[i % 4],
                global_mode: modes[i % 3],
                dropout: 0.1,
            };
            let faces = rng.random_range(6..=12);
            (cfg, faces)
        })
        .collect()
}

/// Largest per-face score difference between two predictions.
pub fn score_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.max_abs_diff(b)
}

pub fn predict_scores(model: &Model, descriptors: &Tensor, patches: &PatchSet, layout: &BatchLayout) -> Tensor {
    model
        .predict(&ModelInput {
            descriptors,
            patches,
            layout,
        })
        .unwrap()
        .scores
}

/// Re-packs patches to `per_face + extra` pixels, `fill` supplying the
/// contents of every masked pixel row.
pub fn repack_patches(patches: &PatchSet, extra: usize, mut fill: impl FnMut() -> [f64; 3]) -> PatchSet {
    let len = patches.per_face + extra;
    let list: Vec<TexturePatch> = (0..patches.face_count())
        .map(|f| {
            let p = patches.patch(f);
            let mut pixels = Vec::with_capacity(len);
            let mut mask = Vec::with_capacity(len);
            for i in 0..len {
                if i < p.len() && p.mask[i] {
                    pixels.push(p.pixels[i]);
                    mask.push(true);
                } else {
                    pixels.push(fill());
                    mask.push(false);
                }
            }
            TexturePatch {
                pixels,
                mask,
                original_count: p.original_count,
            }
        })
        .collect();
    PatchSet::from_patches(&list).unwrap()
}

/// Scores after adding `face_pad` padded slots per cluster and `pixel_pad`
/// padded pixels per patch.
pub fn padded_scores(fx: &Fixture, face_pad: usize, pixel_pad: usize) -> Tensor {
    let patches = repack_patches(&fx.patches, pixel_pad, || [0.0; 3]);
    let layout = fx.layout.with_extra_padding(face_pad);
    predict_scores(&fx.model, &fx.descriptors, &patches, &layout)
}

/// Scores with every masked pixel and every padded face slot of `X`
/// filled with random values.
pub fn fuzzed_scores(fx: &Fixture, face_pad: usize, pixel_pad: usize, rng: &mut impl Rng) -> Tensor {
    use texmesh_core::cluster::Slot;
    use texmesh_core::nn::Graph;
    let patches = repack_patches(&fx.patches, pixel_pad, || {
        [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)]
    });
    let layout = fx.layout.with_extra_padding(face_pad);
    let mut g = Graph::new();
    let p = fx.model.bind(&mut g).unwrap();
    let f = fx.model.face_features(&mut g, &p, &fx.descriptors, &patches, None).unwrap();
    let x = fx.model.assemble(&mut g, &p, f, &layout).unwrap();
    let mut xv = g.value(x).clone();
    for (i, s) in layout.slots().iter().enumerate() {
        if *s == Slot::Padding {
            for v in xv.row_mut(i) {
                *v = rng.random_range(-50.0..50.0);
            }
        }
    }
    let mut g = Graph::new();
    let p = fx.model.bind(&mut g).unwrap();
    let x = g.leaf(xv).unwrap();
    let probs = fx.model.forward_batch(&mut g, &p, x, &layout, None).unwrap();
    g.value(probs).clone()
}

/// Scores after shuffling faces within clusters and pixel rows within
/// patches (mask flags travel with their pixels).
pub fn permuted_scores(fx: &Fixture, rng: &mut impl Rng) -> Tensor {
    use rand::seq::SliceRandom;
    let mut members = fx.members.clone();
    for m in members.iter_mut() {
        m.shuffle(rng);
    }
    let layout = BatchLayout::from_members(&members, 0).unwrap();
    let list: Vec<TexturePatch> = (0..fx.patches.face_count())
        .map(|f| {
            let p = fx.patches.patch(f);
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.shuffle(rng);
            TexturePatch {
                pixels: order.iter().map(|&i| p.pixels[i]).collect(),
                mask: order.iter().map(|&i| p.mask[i]).collect(),
                original_count: p.original_count,
            }
        })
        .collect();
    let patches = PatchSet::from_patches(&list).unwrap();
    predict_scores(&fx.model, &fx.descriptors, &patches, &layout)
}

/// Scores after renaming faces by `perm` (new face `i` is old face `perm[i]`),
/// mapped back to the old face order.
pub fn renamed_scores(fx: &Fixture, perm: &[usize]) -> Tensor {
    let faces = perm.len();
    let mut inverse = vec![0; faces];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let rows: Vec<Vec<f64>> = perm.iter().map(|&o| fx.descriptors.row(o).to_vec()).collect();
    let descriptors = Tensor::from_rows(&rows).unwrap();
    let list: Vec<TexturePatch> = perm.iter().map(|&o| fx.patches.patch(o)).collect();
    let patches = PatchSet::from_patches(&list).unwrap();
    let members: Vec<Vec<usize>> = fx.members.iter().map(|m| m.iter().map(|&f| inverse[f]).collect()).collect();
    let layout = BatchLayout::from_members(&members, 0).unwrap();
    let s = predict_scores(&fx.model, &descriptors, &patches, &layout);
    let back: Vec<Vec<f64>> = (0..faces).map(|old| s.row(inverse[old]).to_vec()).collect();
    Tensor::from_rows(&back).unwrap()
}

/// Perturbs descriptors and pixels of every face in `cluster`; returns the
/// largest score change over faces outside it.
pub fn cross_cluster_effect(fx: &Fixture, cluster: usize, rng: &mut impl Rng) -> f64 {
    let before = predict_scores(&fx.model, &fx.descriptors, &fx.patches, &fx.layout);
    let mut descriptors = fx.descriptors.clone();
    let mut list: Vec<TexturePatch> = (0..fx.patches.face_count()).map(|f| fx.patches.patch(f)).collect();
    for &f in &fx.members[cluster] {
        for v in descriptors.row_mut(f) {
            *v += rng.random_range(-1.0..1.0);
        }
        let patch = &mut list[f];
        for (px, m) in patch.pixels.iter_mut().zip(&patch.mask) {
            if *m {
                *px = [rng.random(), rng.random(), rng.random()];
            }
        }
    }
    let patches = PatchSet::from_patches(&list).unwrap();
    let after = predict_scores(&fx.model, &descriptors, &patches, &fx.layout);
    (0..fx.layout.face_count())
        .filter(|f| !fx.members[cluster].contains(f))
        .flat_map(|f| before.row(f).iter().zip(after.row(f)).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

/// Brute-force metrics: one full pass over the data per class and count.
pub struct OracleMetrics {
    pub f1: Vec<f64>,
    pub mf1: f64,
    pub oa: f64,
    pub weighted_f1: Vec<f64>,
    pub weighted_mf1: f64,
    pub weighted_oa: f64,
}

pub fn oracle_metrics(pred: &[usize], labels: &[Option<usize>], areas: &[f64], classes: usize) -> OracleMetrics {
    let sum_where = |cond: &dyn Fn(usize, usize) -> bool, weighted: bool| -> f64 {
        let mut s = 0.0;
        for i in 0..pred.len() {
            if let Some(l) = labels[i] {
                if cond(l, pred[i]) {
                    s += if weighted { areas[i] } else { 1.0 };
                }
            }
        }
        s
    };
    let f1_for = |c: usize, weighted: bool| {
        let tp = sum_where(&|l, p| l == c && p == c, weighted);
        let fp = sum_where(&|l, p| l != c && p == c, weighted);
        let fn_ = sum_where(&|l, p| l == c && p != c, weighted);
        if 2.0 * tp + fp + fn_ == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        }
    };
    let f1: Vec<f64> = (0..classes).map(|c| f1_for(c, false)).collect();
    let weighted_f1: Vec<f64> = (0..classes).map(|c| f1_for(c, true)).collect();
    let w_total = sum_where(&|_, _| true, true);
    OracleMetrics {
        mf1: f1.iter().sum::<f64>() / classes as f64,
        weighted_mf1: weighted_f1.iter().sum::<f64>() / classes as f64,
        oa: sum_where(&|l, p| l == p, false) / sum_where(&|_, _| true, false),
        weighted_oa: if w_total > 0.0 { sum_where(&|l, p| l == p, true) / w_total } else { 0.0 },
        f1,
        weighted_f1,
    }
}

/// Random (label, prediction, area) triples; about a fifth unlabeled.
pub fn random_triples(n: usize, classes: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<Option<usize>>, Vec<f64>) {
    let pred = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let mut labels: Vec<Option<usize>> = (0..n)
        .map(|_| if rng.random_bool(0.2) { None } else { Some(rng.random_range(0..classes)) })
        .collect();
    labels[0] = Some(0);
    let areas = (0..n).map(|_| rng.random_range(0.001..3.0)).collect();
    (pred, labels, areas)
}

/// Whether the report matches the oracle bit for bit.
pub fn report_matches_oracle(r: &texmesh_core::metrics::MetricsReport, o: &OracleMetrics) -> bool {
    r.f1 == o.f1 && r.mf1 == o.mf1 && r.oa == o.oa && r.weighted_f1 == o.weighted_f1 && r.weighted_mf1 == o.weighted_mf1 && r.weighted_oa == o.weighted_oa
}

/// Which property separates the two classes of a synthetic scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Flat grid; class 1 faces sit on a differently colored texture checker.
    Texture,
    /// Uniform texture; class 1 faces lie on a tilted strip.
    Geometry,
    /// Four classes: tilted or flat, crossed with a per-cell random color.
    Mixed,
}

/// `2·n²` faces on a unit grid with a `res × res` texture.
pub fn synthetic_scene(kind: SceneKind, n: usize, res: usize, seed: u64) -> texmesh_core::Mesh {
    use std::sync::Arc;
    use texmesh_core::TextureImage;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors: Vec<usize> = (0..n * n).map(|_| rng.random_range(0..2)).collect();
    let class_of_cell = |i: usize, j: usize| -> usize {
        match kind {
            SceneKind::Texture => ((i * 4 / n) + (j * 4 / n)) % 2,
            SceneKind::Geometry => usize::from(i >= n / 2),
            SceneKind::Mixed => 2 * usize::from(i >= n / 2) + colors[j * n + i],
        }
    };
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let y = j as f64 / n as f64;
            let z = match kind {
                SceneKind::Texture => 0.0,
                SceneKind::Geometry | SceneKind::Mixed => (x - 0.5).max(0.0) * 1.2,
            };
            vertices.push([x, y, z + rng.random_range(-0.002..0.002)]);
        }
    }
    let mut img = TextureImage::solid(res, res, [0.5; 3]).unwrap();
    for py in 0..res {
        for px in 0..res {
            let (i, j) = (px * n / res, py * n / res);
            let base = match (kind, class_of_cell(i, j)) {
                (SceneKind::Texture, 0) => [0.8, 0.3, 0.2],
                (SceneKind::Texture, _) => [0.2, 0.4, 0.8],
                (SceneKind::Geometry, _) => [0.5, 0.5, 0.5],
                (SceneKind::Mixed, c) if c % 2 == 0 => [0.8, 0.3, 0.2],
                (SceneKind::Mixed, _) => [0.2, 0.4, 0.8],
            };
            let jitter = rng.random_range(-0.05..0.05);
            img.set_pixel(px, py, base.map(|c: f64| (c + jitter).clamp(0.0, 1.0)));
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let uv = |i: usize, j: usize| [i as f64 / n as f64, j as f64 / n as f64];
    let mut faces = Vec::new();
    let mut tex = Vec::new();
    let mut labels = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = class_of_cell(i, j);
            faces.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            tex.push([uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)]);
            faces.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            tex.push([uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)]);
            labels.push(Some(c));
            labels.push(Some(c));
        }
    }
    texmesh_core::Mesh::new(vertices, faces, tex, Some(Arc::new(img)))
        .unwrap()
        .with_labels(labels)
        .unwrap()
}

/// Small model and schedule used for the overfitting runs.
pub fn desk_config(modality: Modality, classes: usize) -> (ModelConfig, texmesh_core::train::TrainConfig) {
    use texmesh_core::geometry::AugmentConfig;
    let model = ModelConfig {
        embed_dim: 8,
        face_dim: 16,
        blocks: 2,
        heads: 2,
        classes,
        pixels_per_face: 16,
        clusters: 8,
        modality,
        global_mode: GlobalMode::SelfAttention,
        dropout: 0.0,
    };
    let train = texmesh_core::train::TrainConfig {
        epochs: 300,
        steps_per_epoch: Some(1),
        seed: 7,
        lr_max: 3e-3,
        lr_min: 3e-5,
        augment: AugmentConfig::disabled(),
        eval_every: 50,
        ..Default::default()
    };
    (model, train)
}

/// Trains the desk configuration on one synthetic scene; returns training OA.
pub fn overfit_scene(kind: SceneKind, modality: Modality, classes: usize) -> f64 {
    use texmesh_core::train::{evaluate_tiles, PreparedTile, Trainer};
    let (mcfg, tcfg) = desk_config(modality, classes);
    let mesh = synthetic_scene(kind, 16, 64, 1);
    let tile = vec![PreparedTile::prepare("scene", &mesh, &mcfg, tcfg.seed).unwrap()];
    let model = Model::new(mcfg, tcfg.seed).unwrap();
    let mut t = Trainer::new(model, tcfg, &tile, &tile).unwrap();
    t.run().unwrap();
    evaluate_tiles(t.model(), &tile).unwrap().oa
}
