//! Per-face handcrafted geometry descriptors and geometric augmentation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub type Vec3 = [f64; 3];

/// Component count of [`GeometryDescriptor`].
pub const DESCRIPTOR_LEN: usize = 16;

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    libm::sqrt(dot3(a, a))
}

fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn triangle_area(c: [Vec3; 3]) -> f64 {
    0.5 * norm3(cross(sub(c[1], c[0]), sub(c[2], c[0])))
}

/// Handcrafted face descriptor.
///
/// Layout: corner coordinates (9), unit normal (3), area (1), and the
/// dihedral angles across edges (v0,v1), (v1,v2), (v2,v0) (3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryDescriptor(pub [f64; DESCRIPTOR_LEN]);

impl GeometryDescriptor {
    pub fn coords(&self) -> &[f64] {
        &self.0[0..9]
    }

    pub fn normal(&self) -> Vec3 {
        [self.0[9], self.0[10], self.0[11]]
    }

    pub fn area(&self) -> f64 {
        self.0[12]
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.0[13], self.0[14], self.0[15]]
    }
}

/// Centers vertices at their centroid and divides by the bounding-box diagonal.
pub fn normalize_vertices(vertices: &[Vec3]) -> Result<Vec<Vec3>> {
    if vertices.len() < 3 {
        return Err(Error::DegenerateMesh(alloc::format!(
            "{} vertices, need at least 3",
            vertices.len()
        )));
    }
    let n = vertices.len() as f64;
    let mut centroid = [0.0; 3];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for i in 0..3 {
            centroid[i] += v[i];
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let centroid = scale3(centroid, 1.0 / n);
    let diagonal = norm3(sub(hi, lo));
    if !diagonal.is_finite() || diagonal <= 0.0 {
        return Err(Error::DegenerateMesh("bounding-box diagonal is zero".into()));
    }
    Ok(vertices
        .iter()
        .map(|v| scale3(sub(*v, centroid), 1.0 / diagonal))
        .collect())
}

pub fn normalize_mesh(mesh: &Mesh) -> Result<Mesh> {
    let mut out = mesh.clone();
    out.vertices = normalize_vertices(&mesh.vertices)?;
    Ok(out)
}

/// Edge neighborhood of every face.
///
/// For each of a face's three edges, the neighbor is the lowest-indexed
/// other face sharing that edge (several may, on non-manifold edges).
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    neighbors: Vec<[Option<usize>; 3]>,
}

impl Adjacency {
    pub fn new(faces: &[[usize; 3]]) -> Self {
        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if a == b {
                    continue;
                }
                edges.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
        let neighbors = faces
            .iter()
            .enumerate()
            .map(|(f, tri)| {
                let mut n = [None; 3];
                for (e, slot) in n.iter_mut().enumerate() {
                    let (a, b) = (tri[e], tri[(e + 1) % 3]);
                    // Face lists are built in ascending order.
                    *slot = edges
                        .get(&(a.min(b), a.max(b)))
                        .and_then(|fs| fs.iter().copied().find(|&g| g != f));
                }
                n
            })
            .collect();
        Self { neighbors }
    }

    pub fn neighbors(&self, face: usize) -> [Option<usize>; 3] {
        self.neighbors[face]
    }
}

/// Interior angle between two triangles hinged on edge `p0`-`p1`, with
/// opposite vertices `a` and `b`; π when they are coplanar and unfolded.
pub fn dihedral_angle(p0: Vec3, p1: Vec3, a: Vec3, b: Vec3) -> f64 {
    let e = sub(p1, p0);
    let len = norm3(e);
    if len == 0.0 {
        return PI;
    }
    let e = scale3(e, 1.0 / len);
    let perp = |x: Vec3| {
        let d = sub(x, p0);
        sub(d, scale3(e, dot3(d, e)))
    };
    let (u, w) = (perp(a), perp(b));
    if norm3(u) == 0.0 || norm3(w) == 0.0 {
        return PI;
    }
    libm::atan2(norm3(cross(u, w)), dot3(u, w))
}

fn descriptor_with(vertices: &[Vec3], faces: &[[usize; 3]], adjacency: &Adjacency, f: usize) -> GeometryDescriptor {
    let tri = faces[f];
    let c = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    let mut d = [0.0; DESCRIPTOR_LEN];
    for (i, v) in c.iter().enumerate() {
        d[i * 3..i * 3 + 3].copy_from_slice(v);
    }
    let n = cross(sub(c[1], c[0]), sub(c[2], c[0]));
    let len = norm3(n);
    let distinct = tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2];
    if !distinct || len == 0.0 {
        // Degenerate: zero normal, zero area, flat angles.
        d[13..16].fill(PI);
        return GeometryDescriptor(d);
    }
    d[9..12].copy_from_slice(&scale3(n, 1.0 / len));
    d[12] = 0.5 * len;
    for (e, nb) in adjacency.neighbors(f).iter().enumerate() {
        let (i0, i1) = (tri[e], tri[(e + 1) % 3]);
        d[13 + e] = match nb {
            None => PI,
            Some(g) => {
                let other = faces[*g];
                let opposite = other.iter().copied().find(|&v| v != i0 && v != i1);
                match opposite {
                    Some(o) => dihedral_angle(vertices[i0], vertices[i1], c[(e + 2) % 3], vertices[o]),
                    None => PI,
                }
            }
        };
    }
    GeometryDescriptor(d)
}

/// Descriptor of one face of an (already normalized) mesh.
pub fn face_descriptor(mesh: &Mesh, face: usize) -> Result<GeometryDescriptor> {
    if face >= mesh.faces.len() {
        return Err(Error::OutOfRange {
            index: face,
            len: mesh.faces.len(),
        });
    }
    let adjacency = Adjacency::new(&mesh.faces);
    Ok(descriptor_with(&mesh.vertices, &mesh.faces, &adjacency, face))
}

/// Descriptors for every face, given vertex positions and a prebuilt adjacency.
pub fn face_descriptors(vertices: &[Vec3], faces: &[[usize; 3]], adjacency: &Adjacency) -> Vec<GeometryDescriptor> {
    (0..faces.len())
        .map(|f| descriptor_with(vertices, faces, adjacency, f))
        .collect()
}

pub fn mesh_descriptors(mesh: &Mesh) -> Vec<GeometryDescriptor> {
    face_descriptors(&mesh.vertices, &mesh.faces, &Adjacency::new(&mesh.faces))
}

/// Random geometric augmentation applied to normalized vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Per-axis rotation bound, radians.
    pub max_rotation: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Standard deviation of additive vertex noise, normalized units.
    pub noise_sigma: f64,
    pub rotate: bool,
    pub scale: bool,
    pub noise: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            max_rotation: PI / 4.0,
            scale_min: 0.5,
            scale_max: 2.0,
            noise_sigma: 0.01,
            rotate: true,
            scale: true,
            noise: true,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            rotate: false,
            scale: false,
            noise: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_min > 0.0 && self.scale_max >= self.scale_min) {
            return Err(Error::InvalidArgument("scale range must be positive and ordered".into()));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 || self.max_rotation.is_nan() || self.max_rotation < 0.0 {
            return Err(Error::InvalidArgument("noise sigma and rotation bound must be non-negative".into()));
        }
        Ok(())
    }
}

/// Rotation `Rz(c)·Ry(b)·Rx(a)`.
pub fn rotation_matrix(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = (libm::sin(a), libm::cos(a));
    let (sb, cb) = (libm::sin(b), libm::cos(b));
    let (sc, cc) = (libm::sin(c), libm::cos(c));
    let rx = [[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rz = [[cc, -sc, 0.0], [sc, cc, 0.0], [0.0, 0.0, 1.0]];
    matmul3(rz, matmul3(ry, rx))
}

fn matmul3(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn apply3(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

/// Rotation, then uniform scaling, then per-vertex Gaussian noise.
pub fn augment_vertices<R: Rng + ?Sized>(vertices: &[Vec3], config: &AugmentConfig, rng: &mut R) -> Vec<Vec3> {
    let mut out = vertices.to_vec();
    if config.rotate {
        let m = config.max_rotation;
        let mut angle = || if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
        let (a, b, c) = (angle(), angle(), angle());
        let r = rotation_matrix(a, b, c);
        for v in &mut out {
            *v = apply3(&r, *v);
        }
    }
    if config.scale {
        let s = if config.scale_max > config.scale_min {
            rng.random_range(config.scale_min..=config.scale_max)
        } else {
            config.scale_min
        };
        for v in &mut out {
            *v = scale3(*v, s);
        }
    }
    if config.noise && config.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, config.noise_sigma).expect("sigma validated as finite and non-negative");
        for v in &mut out {
            for x in v.iter_mut() {
                *x += normal.sample(rng);
            }
        }
    }
    out
}

/// Augmented copy of `mesh`; topology, texture coordinates and labels are untouched.
pub fn augment<R: Rng + ?Sized>(mesh: &Mesh, config: &AugmentConfig, rng: &mut R) -> Mesh {
    let mut out = mesh.clone();
    out.vertices = augment_vertices(&mesh.vertices, config, rng);
    out
}

/// Flattens descriptors into a `faces × 16` row-major buffer.
pub fn descriptor_matrix(descriptors: &[GeometryDescriptor]) -> Vec<f64> {
    let mut out = vec![0.0; descriptors.len() * DESCRIPTOR_LEN];
    for (row, d) in out.chunks_mut(DESCRIPTOR_LEN).zip(descriptors) {
        row.copy_from_slice(&d.0);
    }
    out
}
