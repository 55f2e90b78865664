//! On-disk fixtures: synthetic tiles written as OBJ + PNG + label files,
//! small run configurations, and a wrapper around the built binary.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use texmesh::labels::save_labels;
use texmesh::obj::{obj_text, save_texture};
use texmesh_core::Mesh;

pub struct TileFiles {
    pub mesh: PathBuf,
    pub texture: PathBuf,
    pub labels: PathBuf,
}

pub fn write_tile(dir: &Path, name: &str, mesh: &Mesh) -> TileFiles {
    fs::create_dir_all(dir).unwrap();
    let files = TileFiles {
        mesh: dir.join(format!("{name}.obj")),
        texture: dir.join(format!("{name}.png")),
        labels: dir.join(format!("{name}.txt")),
    };
    fs::write(&files.mesh, obj_text(mesh)).unwrap();
    save_texture(mesh.texture.as_ref().unwrap(), &files.texture).unwrap();
    save_labels(mesh.labels.as_ref().unwrap(), &files.labels).unwrap();
    files
}

/// Writes a tile list naming `tiles` (relative to `dir`).
pub fn write_list(dir: &Path, file: &str, tiles: &[&str], with_labels: bool) -> PathBuf {
    let mut text = String::from("# mesh texture labels\n");
    for t in tiles {
        if with_labels {
            text += &format!("{t}.obj {t}.png {t}.txt\n");
        } else {
            text += &format!("{t}.obj {t}.png\n");
        }
    }
    let path = dir.join(file);
    fs::write(&path, text).unwrap();
    path
}

/// Desk-scale model and 50 optimizer steps (5 epochs of 10).
pub const SMOKE_CONFIG: &str = r#"
seed = 11
classes = 2
embed_dim = 8
face_dim = 16
blocks = 2
heads = 2
pixels_per_face = 16
clusters = 8
dropout = 0.1
epochs = 5
steps_per_epoch = 10
lr_max = 3e-3
lr_min = 3e-5
eval_every = 1
train_tiles = "train.txt"
val_tiles = "val.txt"
test_tiles = "test.txt"
output_dir = "out"
"#;

/// Two labeled synthetic tiles plus lists and a config in `dir`.
pub fn smoke_run(dir: &Path, scene: &dyn Fn(u64) -> Mesh, extra: &str) -> PathBuf {
    write_tile(dir, "a", &scene(1));
    write_tile(dir, "b", &scene(2));
    write_list(dir, "train.txt", &["a"], true);
    write_list(dir, "val.txt", &["b"], true);
    write_list(dir, "test.txt", &["a", "b"], true);
    let cfg = dir.join("run.toml");
    fs::write(&cfg, format!("{SMOKE_CONFIG}{extra}")).unwrap();
    cfg
}

pub fn texmesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_texmesh"))
        .args(args)
        .env_remove(texmesh::config::OUTPUT_DIR_ENV)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr unless it succeeds.
pub fn ok(args: &[&str]) -> String {
    let out = texmesh(args);
    assert!(
        out.status.success(),
        "texmesh {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parsed prediction CSV: (label column, score rows).
pub fn read_predictions(path: &Path) -> (Vec<usize>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("face_index,label,score_0"), "{header}");
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0].parse::<usize>().unwrap(), i);
        labels.push(cols[1].parse().unwrap());
        scores.push(cols[2..].iter().map(|c| c.parse().unwrap()).collect());
    }
    (labels, scores)
}
