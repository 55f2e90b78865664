use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-face class label; `None` marks an unlabeled face.
pub type Label = Option<usize>;

/// RGB raster with channel values in `[0, 1]`, stored row-major from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl TextureImage {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("texture image has zero size".into()));
        }
        if data.len() != width * height * Self::CHANNELS {
            return Err(Error::InvalidArgument(format!(
                "texture {}x{} needs {} values, got {}",
                width,
                height,
                width * height * Self::CHANNELS,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with one color.
    pub fn solid(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel values at column `x`, row `y`.
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * Self::CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * Self::CHANNELS;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Textured triangle mesh. No manifoldness or watertightness is assumed.
///
/// Texture coordinates are stored per face corner in image convention:
/// `u` grows to the right and `v` grows downward from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub tex_coords: Vec<[[f64; 2]; 3]>,
    pub texture: Option<Arc<TextureImage>>,
    pub labels: Option<Vec<Label>>,
}

impl Mesh {
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        tex_coords: Vec<[[f64; 2]; 3]>,
        texture: Option<Arc<TextureImage>>,
    ) -> Result<Self> {
        let mesh = Self {
            vertices,
            faces,
            tex_coords,
            texture,
            labels: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.faces.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} faces",
                labels.len(),
                self.faces.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for f in &self.faces {
            for &v in f {
                if v >= n {
                    return Err(Error::OutOfRange { index: v, len: n });
                }
            }
        }
        if self.tex_coords.len() != self.faces.len() {
            return Err(Error::InvalidArgument(format!(
                "{} texture-coordinate triples for {} faces",
                self.tex_coords.len(),
                self.faces.len()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.faces.len() {
                return Err(Error::InvalidArgument("label count differs from face count".into()));
            }
        }
        Ok(())
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn corners(&self, face: usize) -> [[f64; 3]; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Triangle areas in the mesh's own units.
    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len())
            .map(|f| crate::geometry::triangle_area(self.corners(f)))
            .collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|l| l.is_some()).count())
    }
}

/// Wraps a texture coordinate into `[0, 1]` by its fractional part.
/// Values already inside the closed interval are kept.
pub fn wrap_uv(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        x
    } else {
        x - libm::floor(x)
    }
}
