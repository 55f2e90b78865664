//! Class colors for exported meshes.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use texmesh_core::mesh::Label;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub name: String,
    pub color: Rgb,
}

/// Bijective class → color map with one reserved color for unlabeled faces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPalette {
    classes: Vec<ClassEntry>,
    unlabeled: Rgb,
}

const URBAN: [(&str, Rgb); 6] = [
    ("terrain", [0, 0, 255]),
    ("high vegetation", [0, 100, 0]),
    ("building", [0, 255, 0]),
    ("water", [255, 255, 0]),
    ("car", [255, 165, 0]),
    ("boat", [255, 0, 0]),
];

const UNLABELED_COLOR: Rgb = [0, 0, 0];

fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

impl ClassPalette {
    pub fn new(classes: Vec<ClassEntry>, unlabeled: Rgb) -> Result<Self> {
        let mut seen = HashSet::from([unlabeled]);
        for c in &classes {
            if !seen.insert(c.color) {
                return Err(Error::Config(format!(
                    "palette color {:?} of class {:?} is not unique",
                    c.color, c.name
                )));
            }
        }
        Ok(Self { classes, unlabeled })
    }

    /// The urban six-class colors, extended with generated hues for more classes.
    pub fn default_for(classes: usize) -> Self {
        let mut seen = HashSet::from([UNLABELED_COLOR]);
        let mut entries = Vec::with_capacity(classes);
        for (name, color) in URBAN.iter().take(classes) {
            seen.insert(*color);
            entries.push(ClassEntry {
                name: name.to_string(),
                color: *color,
            });
        }
        let mut k = 0u32;
        while entries.len() < classes {
            let h = (f64::from(k) * 0.618_033_988_749_895).fract();
            let s = 0.45 + 0.5 * f64::from((k / 7) % 2);
            let v = 0.6 + 0.35 * f64::from((k / 3) % 2);
            let color = hsv(h, s, v);
            k += 1;
            if seen.insert(color) {
                entries.push(ClassEntry {
                    name: format!("class {}", entries.len()),
                    color,
                });
            }
        }
        Self {
            classes: entries,
            unlabeled: UNLABELED_COLOR,
        }
    }

    /// Parses lines `name r g b` in class order; an optional line
    /// `unlabeled r g b` sets the reserved color. `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut classes = Vec::new();
        let mut unlabeled = UNLABELED_COLOR;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() < 4 {
                return Err(Error::parse(path, n + 1, "expected `name r g b`"));
            }
            let (name, rgb) = parts.split_at(parts.len() - 3);
            let mut color = [0u8; 3];
            for (c, s) in color.iter_mut().zip(rgb) {
                *c = s
                    .parse()
                    .map_err(|_| Error::parse(path, n + 1, format!("bad color component {s:?}")))?;
            }
            let name = name.join(" ");
            if name == "unlabeled" {
                unlabeled = color;
            } else {
                classes.push(ClassEntry { name, color });
            }
        }
        Self::new(classes, unlabeled)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn unlabeled(&self) -> Rgb {
        self.unlabeled
    }

    pub fn color(&self, label: Label) -> Result<Rgb> {
        match label {
            None => Ok(self.unlabeled),
            Some(c) => self
                .classes
                .get(c)
                .map(|e| e.color)
                .ok_or_else(|| Error::Config(format!("class {c} has no palette color ({} defined)", self.classes.len()))),
        }
    }

    /// Inverse lookup; `Some(None)` is the unlabeled color.
    pub fn label_of(&self, color: Rgb) -> Option<Label> {
        if color == self.unlabeled {
            return Some(None);
        }
        self.classes.iter().position(|e| e.color == color).map(Some)
    }
}
