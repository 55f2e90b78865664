//! Wavefront OBJ reading (`v`, `vt`, `f`) and per-face colored export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use texmesh_core::mesh::{wrap_uv, Label};
use texmesh_core::{Mesh, TextureImage};

use crate::error::{Error, Result};
use crate::palette::ClassPalette;

/// Geometry and texture coordinates of an OBJ file.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjGeometry {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    /// Per face corner, image convention (`v` grows downward).
    pub tex_coords: Vec<[[f64; 2]; 3]>,
}

fn resolve(raw: &str, len: usize, what: &str, path: &Path, line: usize) -> Result<usize> {
    let i: i64 = raw
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} index {raw:?}")))?;
    let idx = if i > 0 {
        i - 1
    } else if i < 0 {
        len as i64 + i
    } else {
        -1
    };
    if idx < 0 || idx as usize >= len {
        return Err(Error::parse(path, line, format!("{what} index {i} out of range ({len} defined)")));
    }
    Ok(idx as usize)
}

fn floats<const N: usize>(parts: &[&str], path: &Path, line: usize) -> Result<[f64; N]> {
    if parts.len() < N {
        return Err(Error::parse(path, line, format!("expected {N} numbers")));
    }
    let mut out = [0.0f64; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad number {p:?}")))?;
        if !o.is_finite() {
            return Err(Error::parse(path, line, format!("non-finite number {p:?}")));
        }
    }
    Ok(out)
}

/// Parses OBJ text. Polygons are fan-triangulated; trailing vertex colors
/// on `v` records are ignored. Every face corner needs a texture coordinate.
pub fn parse_obj(text: &str, path: &Path) -> Result<ObjGeometry> {
    let mut vertices = Vec::new();
    let mut uvs: Vec<[f64; 2]> = Vec::new();
    let mut faces = Vec::new();
    let mut tex_coords = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => vertices.push(floats::<3>(&rest, path, line)?),
            "vt" => {
                let [u, v] = floats::<2>(&rest, path, line)?;
                uvs.push([wrap_uv(u), 1.0 - wrap_uv(v)]);
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(Error::parse(path, line, "face with fewer than 3 corners"));
                }
                let mut corners = Vec::with_capacity(rest.len());
                for c in &rest {
                    let mut fields = c.split('/');
                    let v = resolve(fields.next().unwrap_or(""), vertices.len(), "vertex", path, line)?;
                    let t = match fields.next() {
                        Some(t) if !t.is_empty() => resolve(t, uvs.len(), "texture coordinate", path, line)?,
                        _ => return Err(Error::parse(path, line, "face corner without texture coordinate")),
                    };
                    corners.push((v, t));
                }
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    faces.push(tri.map(|c| c.0));
                    tex_coords.push(tri.map(|c| uvs[c.1]));
                }
            }
            _ => {}
        }
    }
    Ok(ObjGeometry {
        vertices,
        faces,
        tex_coords,
    })
}

pub fn load_obj(path: &Path) -> Result<ObjGeometry> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// 8-bit RGB image scaled to `[0, 1]`.
pub fn load_texture(path: &Path) -> Result<TextureImage> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect();
    Ok(TextureImage::new(w as usize, h as usize, data)?)
}

pub fn load_textured_mesh(mesh_path: &Path, texture_path: &Path) -> Result<Mesh> {
    let geo = load_obj(mesh_path)?;
    let texture = load_texture(texture_path)?;
    Ok(Mesh::new(geo.vertices, geo.faces, geo.tex_coords, Some(Arc::new(texture)))?)
}

/// Writes an 8-bit PNG of `texture`.
pub fn save_texture(texture: &TextureImage, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = texture.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    image::RgbImage::from_raw(texture.width() as u32, texture.height() as u32, bytes)
        .expect("buffer matches dimensions")
        .save(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}

/// Plain OBJ text of `mesh` with shared vertices (the inverse of [`parse_obj`]).
pub fn obj_text(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for uv in mesh.tex_coords.iter().flatten() {
        let _ = writeln!(s, "vt {} {}", uv[0], 1.0 - uv[1]);
    }
    for (i, f) in mesh.faces.iter().enumerate() {
        let t = 3 * i + 1;
        let _ = writeln!(s, "f {}/{} {}/{} {}/{}", f[0] + 1, t, f[1] + 1, t + 1, f[2] + 1, t + 2);
    }
    s
}

/// Vertex-duplicated OBJ whose `v x y z r g b` records carry each face's
/// class color, so every face is drawn in a single flat color.
pub fn colored_obj_text(mesh: &Mesh, labels: &[Label], palette: &ClassPalette) -> Result<String> {
    if labels.len() != mesh.face_count() {
        return Err(Error::Config(format!(
            "{} labels for {} faces",
            labels.len(),
            mesh.face_count()
        )));
    }
    let mut s = String::from("# per-face class colors\n");
    for (f, label) in labels.iter().enumerate() {
        let [r, g, b] = palette.color(*label)?.map(|c| f64::from(c) / 255.0);
        for v in mesh.corners(f) {
            let _ = writeln!(s, "v {} {} {} {r:.6} {g:.6} {b:.6}", v[0], v[1], v[2]);
        }
    }
    for uv in mesh.tex_coords.iter().flatten() {
        let _ = writeln!(s, "vt {} {}", uv[0], 1.0 - uv[1]);
    }
    for f in 0..mesh.face_count() {
        let i = 3 * f + 1;
        let _ = writeln!(s, "f {i}/{i} {}/{} {}/{}", i + 1, i + 1, i + 2, i + 2);
    }
    Ok(s)
}

pub fn export_labeled_mesh(mesh: &Mesh, labels: &[Label], palette: &ClassPalette, path: &Path) -> Result<()> {
    let text = colored_obj_text(mesh, labels, palette)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
