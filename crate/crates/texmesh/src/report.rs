//! CSV and text outputs: per-face predictions, training history, metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use texmesh_core::metrics::MetricsReport;
use texmesh_core::model::Prediction;
use texmesh_core::train::{StepRecord, ValidationRecord};

use crate::error::{Error, Result};
use crate::palette::ClassPalette;

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `face_index,label,score_0..score_{C-1}`; scores print in shortest
/// round-trip form.
pub fn predictions_csv(pred: &Prediction) -> String {
    let c = pred.scores.cols();
    let mut s = String::from("face_index,label");
    for k in 0..c {
        let _ = write!(s, ",score_{k}");
    }
    s.push('\n');
    for (f, label) in pred.labels.iter().enumerate() {
        let _ = write!(s, "{f},{label}");
        for v in pred.scores.row(f) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn history_csv(history: &[StepRecord]) -> String {
    let mut s = String::from("step,lr,loss\n");
    for r in history {
        let loss = r.loss.map_or_else(String::new, |l| l.to_string());
        let _ = writeln!(s, "{},{},{loss}", r.step, r.lr);
    }
    s
}

pub fn validation_csv(records: &[ValidationRecord]) -> String {
    let mut s = String::from("epoch,step,mf1,oa\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.step, r.mf1, r.oa);
    }
    s
}

fn class_name(palette: Option<&ClassPalette>, k: usize) -> String {
    palette
        .and_then(|p| p.entries().get(k))
        .map_or_else(|| format!("class {k}"), |e| e.name.clone())
}

/// Per-class F1 table with unweighted and area-weighted sections, in percent.
pub fn metrics_text(report: &MetricsReport, palette: Option<&ClassPalette>) -> String {
    let names: Vec<String> = (0..report.classes).map(|k| class_name(palette, k)).collect();
    let width = names.iter().map(String::len).max().unwrap_or(0).max(5);
    let mut s = format!("labeled faces: {}\n", report.labeled);
    let sections = [
        ("unweighted (per face)", &report.f1, report.mf1, report.oa),
        ("area-weighted", &report.weighted_f1, report.weighted_mf1, report.weighted_oa),
    ];
    for (title, f1, mf1, oa) in sections {
        let _ = writeln!(s, "\n[{title}]");
        let _ = writeln!(s, "{:<width$}  {:>7}", "class", "F1 (%)");
        for (name, v) in names.iter().zip(f1) {
            let _ = writeln!(s, "{name:<width$}  {:>7.2}", v * 100.0);
        }
        let _ = writeln!(s, "{:<width$}  {:>7.2}", "mF1", mf1 * 100.0);
        let _ = writeln!(s, "{:<width$}  {:>7.2}", "OA", oa * 100.0);
    }
    s
}
