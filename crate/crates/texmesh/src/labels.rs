//! Per-face label files: one integer per line, `-1` for unlabeled.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use texmesh_core::mesh::Label;

use crate::error::{Error, Result};

pub const UNLABELED: i64 = -1;

pub fn parse_labels(text: &str, face_count: usize, classes: usize, path: &Path) -> Result<Vec<Label>> {
    let mut labels = Vec::with_capacity(face_count);
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("bad label {line:?}")))?;
        let label = match v {
            UNLABELED => None,
            v if v >= 0 && (v as u64) < classes as u64 => Some(v as usize),
            v => return Err(Error::parse(path, n + 1, format!("label {v} outside -1..{}", classes.saturating_sub(1)))),
        };
        labels.push(label);
    }
    if labels.len() != face_count {
        return Err(Error::Config(format!(
            "{}: {} labels for {face_count} faces",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

pub fn load_labels(path: &Path, face_count: usize, classes: usize) -> Result<Vec<Label>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, face_count, classes, path)
}

pub fn labels_text(labels: &[Label]) -> String {
    let mut s = String::new();
    for l in labels {
        let _ = writeln!(s, "{}", l.map_or(UNLABELED, |c| c as i64));
    }
    s
}

pub fn save_labels(labels: &[Label], path: &Path) -> Result<()> {
    fs::write(path, labels_text(labels)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, n: usize) -> Result<Vec<Label>> {
        parse_labels(s, n, 6, Path::new("l.txt"))
    }

    #[test]
    fn examples() {
        assert_eq!(parse("0\n2\n-1", 3).unwrap(), vec![Some(0), Some(2), None]);
        assert!(parse("0\n2\n", 3).is_err());
        assert_eq!(parse("-1\n-1\n", 2).unwrap(), vec![None, None]);
        assert!(parse("6\n", 1).is_err());
        assert!(parse("-2\n", 1).is_err());
        assert!(parse("x\n", 1).is_err());
    }

    #[test]
    fn text_round_trips() {
        let l = vec![Some(5), None, Some(0)];
        assert_eq!(parse(&labels_text(&l), 3).unwrap(), l);
    }
}
