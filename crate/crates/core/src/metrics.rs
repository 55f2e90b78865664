//! Confusion-matrix metrics over labeled faces: per-class F1, mF1, OA,
//! and the area-weighted variants.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::mesh::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: usize,
    /// `confusion[reference][predicted]` face counts.
    pub confusion: Vec<Vec<u64>>,
    /// Same layout, summing face areas.
    pub weighted_confusion: Vec<Vec<f64>>,
    pub f1: Vec<f64>,
    pub mf1: f64,
    pub oa: f64,
    pub weighted_f1: Vec<f64>,
    pub weighted_mf1: f64,
    pub weighted_oa: f64,
    pub labeled: u64,
}

/// Running per-class tallies, accumulated in input order.
#[derive(Debug, Clone)]
pub struct Tally {
    classes: usize,
    confusion: Vec<Vec<u64>>,
    weighted: Vec<Vec<f64>>,
    tp: Vec<f64>,
    fp: Vec<f64>,
    fn_: Vec<f64>,
    w_tp: Vec<f64>,
    w_fp: Vec<f64>,
    w_fn: Vec<f64>,
    correct: f64,
    w_correct: f64,
    total: f64,
    w_total: f64,
    labeled: u64,
}

impl Tally {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            confusion: vec![vec![0; classes]; classes],
            weighted: vec![vec![0.0; classes]; classes],
            tp: vec![0.0; classes],
            fp: vec![0.0; classes],
            fn_: vec![0.0; classes],
            w_tp: vec![0.0; classes],
            w_fp: vec![0.0; classes],
            w_fn: vec![0.0; classes],
            correct: 0.0,
            w_correct: 0.0,
            total: 0.0,
            w_total: 0.0,
            labeled: 0,
        }
    }

    /// Adds faces; unlabeled faces are skipped.
    pub fn add(&mut self, predictions: &[usize], labels: &[Label], areas: &[f64]) -> Result<()> {
        if predictions.len() != labels.len() || areas.len() != labels.len() {
            return Err(shape_err("evaluate", "prediction, label and area counts differ"));
        }
        let c = self.classes;
        for ((&p, l), &w) in predictions.iter().zip(labels).zip(areas) {
            let Some(r) = *l else { continue };
            if r >= c || p >= c {
                return Err(Error::OutOfRange { index: r.max(p), len: c });
            }
            self.confusion[r][p] += 1;
            self.weighted[r][p] += w;
            self.total += 1.0;
            self.w_total += w;
            self.labeled += 1;
            if r == p {
                self.tp[r] += 1.0;
                self.w_tp[r] += w;
                self.correct += 1.0;
                self.w_correct += w;
            } else {
                self.fp[p] += 1.0;
                self.fn_[r] += 1.0;
                self.w_fp[p] += w;
                self.w_fn[r] += w;
            }
        }
        Ok(())
    }

    pub fn report(&self) -> Result<MetricsReport> {
        if self.labeled == 0 {
            return Err(Error::NoLabels);
        }
        let f1 = f1_scores(&self.tp, &self.fp, &self.fn_);
        let weighted_f1 = f1_scores(&self.w_tp, &self.w_fp, &self.w_fn);
        Ok(MetricsReport {
            classes: self.classes,
            confusion: self.confusion.clone(),
            weighted_confusion: self.weighted.clone(),
            mf1: mean(&f1),
            oa: self.correct / self.total,
            weighted_mf1: mean(&weighted_f1),
            // All-zero areas leave the weighted accuracy undefined; report 0.
            weighted_oa: if self.w_total > 0.0 { self.w_correct / self.w_total } else { 0.0 },
            f1,
            weighted_f1,
            labeled: self.labeled,
        })
    }
}

/// `2TP / (2TP + FP + FN)`, or 0 when the denominator vanishes.
pub fn f1_score(tp: f64, fp: f64, fn_: f64) -> f64 {
    let denom = 2.0 * tp + fp + fn_;
    if denom > 0.0 {
        2.0 * tp / denom
    } else {
        0.0
    }
}

fn f1_scores(tp: &[f64], fp: &[f64], fn_: &[f64]) -> Vec<f64> {
    (0..tp.len()).map(|c| f1_score(tp[c], fp[c], fn_[c])).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Metrics over labeled faces, with face areas as weights for the weighted variants.
pub fn evaluate(predictions: &[usize], labels: &[Label], areas: &[f64], classes: usize) -> Result<MetricsReport> {
    let mut t = Tally::new(classes);
    t.add(predictions, labels, areas)?;
    t.report()
}
