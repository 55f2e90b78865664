//! Spatial partition of a mesh into K clusters and the padded cluster-batch
//! layout consumed by the transformer stages.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<const D: usize> {
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; D]>,
    /// Total squared distance to assigned centroids after each iteration.
    pub distortion_history: Vec<f64>,
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds<const D: usize>(points: &[[f64; D]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; D]> {
    let mut centroids = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    chosen[first] = true;
    centroids.push(points[first]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every remaining point coincides with a centroid.
            Err(_) => {
                let free: Vec<usize> = (0..points.len()).filter(|i| !chosen[*i]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen[next] = true;
        centroids.push(points[next]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[next]));
        }
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeds.
///
/// Stops when assignments no longer change or after `max_iter` iterations.
/// An empty cluster takes over the point farthest from its centroid (among
/// clusters with more than one member), so all `k` clusters stay non-empty.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult<D>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k-means needs k >= 1".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(alloc::format!(
            "k-means with k={} on {} points",
            k,
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            dists[i] = d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        let mut sizes = vec![0usize; k];
        for &c in &assignment {
            sizes[c] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("more points than clusters");
            sizes[assignment[far]] -= 1;
            assignment[far] = empty;
            sizes[empty] = 1;
            dists[far] = 0.0;
            changed = true;
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; D]; k];
        for (p, &c) in points.iter().zip(&assignment) {
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, s) in sums.iter().enumerate() {
            for (dst, x) in centroids[c].iter_mut().zip(s) {
                *dst = x / sizes[c] as f64;
            }
        }
        history.push(distortion(points, &assignment, &centroids));
    }
    if history.is_empty() {
        history.push(distortion(points, &assignment, &centroids));
    }
    Ok(KMeansResult {
        assignment,
        centroids,
        distortion_history: history,
    })
}

pub fn distortion<const D: usize>(points: &[[f64; D]], assignment: &[usize], centroids: &[[f64; D]]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| dist2(p, &centroids[c]))
        .sum()
}

/// Majority cluster of each face's three vertices; three distinct
/// clusters are resolved by a uniform draw among them.
pub fn assign_faces<R: Rng + ?Sized>(faces: &[[usize; 3]], vertex_cluster: &[usize], rng: &mut R) -> Vec<usize> {
    faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|v| vertex_cluster[v]);
            if a == b || a == c {
                a
            } else if b == c {
                b
            } else {
                [a, b, c][rng.random_range(0..3)]
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub vertex_cluster: Vec<usize>,
    pub face_cluster: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
}

/// K-means over vertex positions plus majority face assignment.
/// `k` is clamped to the vertex count.
pub fn cluster_mesh(vertices: &[[f64; 3]], faces: &[[usize; 3]], k: usize, seed: u64) -> Result<ClusterAssignment> {
    let k = k.min(vertices.len()).max(1);
    let km = kmeans(vertices, k, seed, KMEANS_MAX_ITER)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let face_cluster = assign_faces(faces, &km.assignment, &mut rng);
    let mut cluster_sizes = vec![0; k];
    for &c in &face_cluster {
        cluster_sizes[c] += 1;
    }
    Ok(ClusterAssignment {
        k,
        vertex_cluster: km.assignment,
        face_cluster,
        cluster_sizes,
    })
}

/// Content of one slot of the cluster batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Token,
    Face(usize),
    Padding,
}

/// Placement of faces in the `K × (S_c + 1)` cluster batch.
///
/// Slot 0 of each cluster holds the cluster token, followed by the
/// cluster's faces, followed by padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchLayout {
    clusters: usize,
    seq_len: usize,
    slots: Vec<Slot>,
    face_slot: Vec<usize>,
}

impl BatchLayout {
    /// Faces in ascending index order inside each cluster, padded to the largest cluster.
    pub fn new(face_cluster: &[usize], k: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); k];
        for (f, &c) in face_cluster.iter().enumerate() {
            if c >= k {
                return Err(Error::OutOfRange { index: c, len: k });
            }
            members[c].push(f);
        }
        Self::from_members(&members, 0)
    }

    /// Layout from explicit per-cluster face lists (in slot order), with
    /// `extra` padding slots beyond the largest cluster.
    pub fn from_members(members: &[Vec<usize>], extra: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("layout needs at least one cluster".into()));
        }
        let faces: usize = members.iter().map(Vec::len).sum();
        let s_c = members.iter().map(Vec::len).max().unwrap_or(0);
        let seq_len = s_c + 1 + extra;
        let mut slots = vec![Slot::Padding; members.len() * seq_len];
        let mut face_slot = vec![usize::MAX; faces];
        for (k, list) in members.iter().enumerate() {
            slots[k * seq_len] = Slot::Token;
            for (i, &f) in list.iter().enumerate() {
                if f >= faces || face_slot[f] != usize::MAX {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "face {f} missing from or repeated in cluster lists"
                    )));
                }
                let s = k * seq_len + 1 + i;
                slots[s] = Slot::Face(f);
                face_slot[f] = s;
            }
        }
        Ok(Self {
            clusters: members.len(),
            seq_len,
            slots,
            face_slot,
        })
    }

    /// Same placement with `extra` additional padding slots per cluster.
    pub fn with_extra_padding(&self, extra: usize) -> Self {
        Self::from_members(&self.members(), self.seq_len - 1 - self.max_cluster_size() + extra)
            .expect("members of a valid layout")
    }

    /// Face lists per cluster, in slot order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        (0..self.clusters)
            .map(|k| {
                self.slots[k * self.seq_len..(k + 1) * self.seq_len]
                    .iter()
                    .filter_map(|s| match s {
                        Slot::Face(f) => Some(*f),
                        _ => None,
                    })
                    .collect()
            })
            .collect()
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    /// `S_c + 1` (plus any extra padding).
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn face_count(&self) -> usize {
        self.face_slot.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn face_slot(&self, face: usize) -> usize {
        self.face_slot[face]
    }

    pub fn cluster_of(&self, face: usize) -> usize {
        self.face_slot[face] / self.seq_len
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }

    fn max_cluster_size(&self) -> usize {
        self.cluster_sizes().into_iter().max().unwrap_or(0)
    }

    /// Attention mask: token and face slots are valid.
    pub fn mask(&self) -> Vec<bool> {
        self.slots.iter().map(|s| !matches!(s, Slot::Padding)).collect()
    }

    pub fn face_mask(&self) -> Vec<bool> {
        self.slots.iter().map(|s| matches!(s, Slot::Face(_))).collect()
    }

    /// Flat row index of each cluster's token slot.
    pub fn token_rows(&self) -> Vec<usize> {
        (0..self.clusters).map(|k| k * self.seq_len).collect()
    }

    /// Source rows for assembling the batch from `[face features; token]`.
    pub fn assembly_rows(&self) -> Vec<Option<usize>> {
        let token_row = self.face_count();
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Token => Some(token_row),
                Slot::Face(f) => Some(*f),
                Slot::Padding => None,
            })
            .collect()
    }

    /// Source rows for recovering per-face rows from the batch.
    pub fn face_rows(&self) -> Vec<Option<usize>> {
        self.face_slot.iter().map(|s| Some(*s)).collect()
    }
}

/// Padded cluster batch `X` with its mask and layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBatch {
    /// Shape `[K, S_c + 1, N_F]`.
    pub x: Tensor,
    pub mask: Vec<bool>,
    pub layout: BatchLayout,
}

pub fn build_batch_with_layout(face_features: &Tensor, cluster_token: &[f64], layout: BatchLayout) -> Result<ClusterBatch> {
    let width = face_features.cols();
    if face_features.rows() != layout.face_count() {
        return Err(shape_err("build_batch", "feature rows differ from face count"));
    }
    if cluster_token.len() != width {
        return Err(shape_err("build_batch", "cluster token width differs from feature width"));
    }
    let mut x = Tensor::zeros(&[layout.clusters(), layout.seq_len(), width]);
    for (i, slot) in layout.slots().iter().enumerate() {
        match slot {
            Slot::Token => x.row_mut(i).copy_from_slice(cluster_token),
            Slot::Face(f) => x.row_mut(i).copy_from_slice(face_features.row(*f)),
            Slot::Padding => {}
        }
    }
    let mask = layout.mask();
    Ok(ClusterBatch { x, mask, layout })
}

/// Assembles `X` from per-face features and the shared cluster token.
pub fn build_batch(face_features: &Tensor, face_cluster: &[usize], cluster_token: &[f64], k: usize) -> Result<ClusterBatch> {
    if face_cluster.len() != face_features.rows() {
        return Err(shape_err("build_batch", "cluster ids differ from feature rows"));
    }
    build_batch_with_layout(face_features, cluster_token, BatchLayout::new(face_cluster, k)?)
}

/// Drops tokens and padding, returning one row per face in face order.
pub fn flatten(z: &Tensor, layout: &BatchLayout) -> Result<Tensor> {
    if z.rows() != layout.clusters() * layout.seq_len() {
        return Err(shape_err(
            "flatten",
            alloc::format!("{} rows for a {}x{} layout", z.rows(), layout.clusters(), layout.seq_len()),
        ));
    }
    let width = z.cols();
    let mut out = Tensor::zeros(&[layout.face_count(), width]);
    for f in 0..layout.face_count() {
        out.row_mut(f).copy_from_slice(z.row(layout.face_slot(f)));
    }
    Ok(out)
}
