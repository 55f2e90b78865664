//! Raw texture pixels per face: rasterization of the texture-space
//! triangle, then truncation or zero padding to a fixed length.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, TextureImage};
use crate::tensor::Tensor;

/// Channel count of texture pixels.
pub const CHANNELS: usize = TextureImage::CHANNELS;

/// Fixed-length pixel sequence of one face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TexturePatch {
    /// `P` rows; rows past the valid prefix are zero.
    pub pixels: Vec<[f64; 3]>,
    pub mask: Vec<bool>,
    /// Number of pixels found before truncation or padding.
    pub original_count: usize,
}

impl TexturePatch {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

fn edge(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

/// Top or left edge for the orientation used in [`rasterize_uv_triangle`]
/// (x right, y down, positive `edge(a, b, c)`).
fn is_top_left(p: [f64; 2], q: [f64; 2]) -> bool {
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// Pixel `(x, y)` positions whose centers fall inside the UV triangle,
/// in row-major order. Centers exactly on an edge count only for top and
/// left edges, so faces sharing a UV edge never claim the same pixel.
///
/// Falls back to the pixel nearest the UV centroid when no center is
/// covered (zero-area or sub-pixel triangles).
pub fn rasterize_uv_triangle(uv: [[f64; 2]; 3], width: usize, height: usize) -> Vec<(usize, usize)> {
    let (w, h) = (width as f64, height as f64);
    let mut p: [[f64; 2]; 3] = [
        [uv[0][0] * w, uv[0][1] * h],
        [uv[1][0] * w, uv[1][1] * h],
        [uv[2][0] * w, uv[2][1] * h],
    ];
    let area2 = edge(p[0], p[1], p[2]);
    let mut out = Vec::new();
    if area2 != 0.0 {
        if area2 < 0.0 {
            p.swap(1, 2);
        }
        let min_x = p.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let max_x = p.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = p.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
        let max_y = p.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = clamp_index(libm::floor(min_x - 0.5), width);
        let x1 = clamp_index(libm::ceil(max_x), width);
        let y0 = clamp_index(libm::floor(min_y - 0.5), height);
        let y1 = clamp_index(libm::ceil(max_y), height);
        let edges = [(p[0], p[1]), (p[1], p[2]), (p[2], p[0])];
        let top_left = edges.map(|(a, b)| is_top_left(a, b));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                let inside = edges.iter().zip(&top_left).all(|((a, b), &tl)| {
                    let e = edge(*a, *b, c);
                    e > 0.0 || (e == 0.0 && tl)
                });
                if inside {
                    out.push((x, y));
                }
            }
        }
    }
    if out.is_empty() {
        let cu = (uv[0][0] + uv[1][0] + uv[2][0]) / 3.0;
        let cv = (uv[0][1] + uv[1][1] + uv[2][1]) / 3.0;
        out.push((clamp_index(libm::floor(cu * w), width), clamp_index(libm::floor(cv * h), height)));
    }
    out
}

fn clamp_index(v: f64, len: usize) -> usize {
    if v <= 0.0 {
        0
    } else {
        (v as usize).min(len - 1)
    }
}

/// Texture pixel values covered by `face`, in row-major image order.
pub fn rasterize_face_pixels(mesh: &Mesh, face: usize) -> Result<Vec<[f64; 3]>> {
    let texture = mesh.texture.as_ref().ok_or(Error::MissingTexture)?;
    let uv = *mesh.tex_coords.get(face).ok_or(Error::OutOfRange {
        index: face,
        len: mesh.tex_coords.len(),
    })?;
    Ok(rasterize_uv_triangle(uv, texture.width(), texture.height())
        .into_iter()
        .map(|(x, y)| texture.pixel(x, y))
        .collect())
}

/// Keeps the first `len` pixels, or zero-pads up to `len`.
pub fn fit_to_length(pixels: &[[f64; 3]], len: usize) -> Result<TexturePatch> {
    if len == 0 {
        return Err(Error::InvalidArgument("patch length must be positive".into()));
    }
    if pixels.is_empty() {
        return Err(Error::InvalidArgument("no pixels to fit".into()));
    }
    let valid = pixels.len().min(len);
    let mut out = vec![[0.0; 3]; len];
    out[..valid].copy_from_slice(&pixels[..valid]);
    let mut mask = vec![false; len];
    mask[..valid].fill(true);
    Ok(TexturePatch {
        pixels: out,
        mask,
        original_count: pixels.len(),
    })
}

/// Patches for every face of `mesh`.
pub fn extract_patches(mesh: &Mesh, len: usize) -> Result<Vec<TexturePatch>> {
    (0..mesh.face_count())
        .map(|f| fit_to_length(&rasterize_face_pixels(mesh, f)?, len))
        .collect()
}

/// Patches of all faces packed for the model: `(faces·P) × 3` pixels plus mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSet {
    pub pixels: Tensor,
    pub mask: Vec<bool>,
    pub per_face: usize,
}

impl PatchSet {
    pub fn from_patches(patches: &[TexturePatch]) -> Result<Self> {
        let per_face = patches.first().map_or(0, TexturePatch::len);
        if per_face == 0 {
            return Err(Error::InvalidArgument("no patches".into()));
        }
        let mut data = Vec::with_capacity(patches.len() * per_face * CHANNELS);
        let mut mask = Vec::with_capacity(patches.len() * per_face);
        for (f, p) in patches.iter().enumerate() {
            if p.len() != per_face || p.mask.len() != per_face {
                return Err(Error::InvalidArgument("patches differ in length".into()));
            }
            if !p.mask.iter().any(|m| *m) {
                return Err(Error::EmptyPatch { face: f });
            }
            data.extend(p.pixels.iter().flatten());
            mask.extend_from_slice(&p.mask);
        }
        Ok(Self {
            pixels: Tensor::new(vec![patches.len() * per_face, CHANNELS], data)?,
            mask,
            per_face,
        })
    }

    pub fn face_count(&self) -> usize {
        self.mask.len() / self.per_face
    }

    pub fn patch(&self, face: usize) -> TexturePatch {
        let p = self.per_face;
        let pixels = (0..p)
            .map(|i| {
                let r = self.pixels.row(face * p + i);
                [r[0], r[1], r[2]]
            })
            .collect();
        let mask = self.mask[face * p..(face + 1) * p].to_vec();
        let original_count = mask.iter().filter(|m| **m).count();
        TexturePatch {
            pixels,
            mask,
            original_count,
        }
    }
}
