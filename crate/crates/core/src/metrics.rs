//! Confusion matrices, precision/recall/F1 and ROC/PR curves.
//!
//! All ratios use the convention `0 / 0 = 0` so every metric is total.
//! Curves are integrated with the trapezoid rule after sorting points by
//! `x` (ties by `y`). ROC curves are anchored at `(0, 0)` and `(1, 1)`; PR
//! curves are extended horizontally from the first point to `x = 0` and
//! from the last point to `x = 1`.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Records one prediction.
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn false_positive_rate(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn f1(&self) -> f64 {
        precision_recall_f1(self).2
    }

    /// True if any of precision, recall or F1 hit the `0 / 0` rule.
    pub fn has_degenerate_ratio(&self) -> bool {
        self.tp + self.fp == 0 || self.tp + self.fn_ == 0
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, rhs: Self) -> Self {
        ConfusionMatrix {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
        }
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionMatrix::default(), Add::add)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(predictions: &[bool], targets: &[bool]) -> Result<ConfusionMatrix> {
    if predictions.len() != targets.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Argument("empty prediction list".to_owned()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(targets) {
        cm.record(p, t);
    }
    Ok(cm)
}

/// Returns `(precision, recall, f1)`.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let p = cm.precision();
    let r = cm.recall();
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Roc => "roc",
            CurveKind::Pr => "pr",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// Window size or threshold that produced the point.
    pub tag: f64,
}

/// `(false positive rate, true positive rate)`.
pub fn roc_point(cm: &ConfusionMatrix) -> CurvePoint {
    CurvePoint {
        x: cm.false_positive_rate(),
        y: cm.recall(),
        tag: f64::NAN,
    }
}

/// `(recall, precision)`.
pub fn pr_point(cm: &ConfusionMatrix) -> CurvePoint {
    CurvePoint {
        x: cm.recall(),
        y: cm.precision(),
        tag: f64::NAN,
    }
}

pub fn curve_point(cm: &ConfusionMatrix, kind: CurveKind) -> CurvePoint {
    match kind {
        CurveKind::Roc => roc_point(cm),
        CurveKind::Pr => pr_point(cm),
    }
}

/// Area under a ROC or PR curve given as an unordered point set.
pub fn auc(points: &[CurvePoint], kind: CurveKind) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Argument("AUC of an empty point set".to_owned()));
    }
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (first, last) = (xy[0], xy[xy.len() - 1]);
    match kind {
        CurveKind::Roc => {
            xy.insert(0, (0.0, 0.0));
            xy.push((1.0, 1.0));
        }
        CurveKind::Pr => {
            xy.insert(0, (0.0, first.1));
            xy.push((1.0, last.1));
        }
    }
    let area: f64 = xy
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(area.clamp(0.0, 1.0))
}

/// One curve point per window size from that window's aggregated confusion
/// matrix, plus the curve's AUC.
pub fn curve_over_windows(
    per_window: &BTreeMap<usize, ConfusionMatrix>,
    kind: CurveKind,
) -> Result<(Vec<CurvePoint>, f64)> {
    let points: Vec<CurvePoint> = per_window
        .iter()
        .map(|(&w, cm)| CurvePoint {
            tag: w as f64,
            ..curve_point(cm, kind)
        })
        .collect();
    let area = auc(&points, kind)?;
    Ok((points, area))
}

/// Conventional threshold-swept curve for one fixed window: one point per
/// distinct score, predicting positive when `score >= threshold`.
pub fn threshold_curve(scores: &[f64], targets: &[bool], kind: CurveKind) -> Result<Vec<CurvePoint>> {
    if scores.len() != targets.len() || scores.is_empty() {
        return Err(Error::Argument(
            "threshold curve needs equal-length, non-empty scores and targets".to_owned(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = targets.iter().filter(|&&t| t).count() as u64;
    let negatives = targets.len() as u64 - positives;
    let mut cm = ConfusionMatrix::new(0, 0, positives, negatives);
    let mut points = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if targets[order[i]] {
                cm.tp += 1;
                cm.fn_ -= 1;
            } else {
                cm.fp += 1;
                cm.tn -= 1;
            }
            i += 1;
        }
        points.push(CurvePoint {
            tag: threshold,
            ..curve_point(&cm, kind)
        });
    }
    Ok(points)
}

/// Writes `kind,algorithm,tag,x,y` rows.
pub fn write_curve_csv<W: Write>(
    curves: &[(CurveKind, String, Vec<CurvePoint>)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Validation(format!("writing curve CSV: {e}"));
    w.write_record(["kind", "algorithm", "tag", "x", "y"]).map_err(csv_err)?;
    for (kind, algorithm, points) in curves {
        for p in points {
            w.write_record([
                kind.as_str().to_owned(),
                algorithm.clone(),
                format_tag(p.tag),
                format!("{:.6}", p.x),
                format!("{:.6}", p.y),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing curve CSV: {e}")))
}

fn format_tag(tag: f64) -> String {
    if tag.fract() == 0.0 && tag.abs() < 1e15 {
        format!("{}", tag as i64)
    } else {
        format!("{tag:.6}")
    }
}

/// Writes `algorithm,roc_auc,pr_auc` rows.
pub fn write_auc_csv<W: Write>(rows: &[(String, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Validation(format!("writing AUC CSV: {e}"));
    w.write_record(["algorithm", "roc_auc", "pr_auc"]).map_err(csv_err)?;
    for (name, roc, pr) in rows {
        w.write_record([name.clone(), format!("{roc:.6}"), format!("{pr:.6}")])
            .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing AUC CSV: {e}")))
}
