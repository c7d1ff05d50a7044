//! Gaze-target evaluation: ROC AUC over heatmaps, normalised L2 distance,
//! minimum distance over annotators and angular error.

use serde::{Deserialize, Serialize};

use crate::dataset::AnnotationRecord;
use crate::error::{Error, Result};
use crate::exec::{pairwise_mean, Execution};
use crate::geometry::BinaryMask;
use crate::heatmap::{gaussian_heatmap, Heatmap, DEFAULT_SIGMA};

/// ROC curve points `(fpr, tpr)` from a descending threshold sweep. Tied
/// scores form a single step, so the curve has one vertex per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(curve)
}

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    Ok((pos, neg))
}

/// Trapezoidal area under the ROC curve of `scores` against `labels`.
///
/// Accumulated in integer counts (twice the area in units of one
/// positive-negative pair) and divided once at the end.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp0) * u128::from(tp + tp0);
    }
    Ok(twice_area as f64 / (2.0 * pos as f64 * neg as f64))
}

/// AUC of a predicted heatmap against a binarised ground-truth mask.
pub fn auc_score(pred: &Heatmap, gt: &BinaryMask) -> Result<f64> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::Dimension(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    roc_auc(pred.values(), gt.bits())
}

pub fn l2_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

pub fn min_distance(pred: (f64, f64), gts: &[(f64, f64)]) -> Result<f64> {
    gts.iter()
        .map(|g| l2_distance(pred, *g))
        .reduce(f64::min)
        .ok_or_else(|| Error::Argument("min distance needs at least one annotation".into()))
}

/// Angle in degrees between the directions `eye -> pred` and `eye -> gt`.
pub fn angular_error(eye: (f64, f64), pred: (f64, f64), gt: (f64, f64)) -> Result<f64> {
    let a = (pred.0 - eye.0, pred.1 - eye.1);
    let b = (gt.0 - eye.0, gt.1 - eye.1);
    let (na, nb) = (a.0.hypot(a.1), b.0.hypot(b.1));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateGaze("gaze vector of zero length".into()));
    }
    let cos = (a.0 * b.0 + a.1 * b.1) / (na * nb);
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees().clamp(0.0, 180.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Ground-truth Gaussian width in heatmap pixels.
    pub sigma: f64,
    /// Ground-truth pixels at or above this value count as positives.
    pub binarize_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sigma: DEFAULT_SIGMA,
            binarize_threshold: (-0.5f64).exp(),
        }
    }
}

/// Metrics for one record; `None` marks a metric that was undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetrics {
    pub index: usize,
    pub image_path: String,
    pub pred_x: f64,
    pub pred_y: f64,
    pub auc: Option<f64>,
    pub dist: Option<f64>,
    pub min_dist: Option<f64>,
    pub angular_deg: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub auc: usize,
    pub dist: usize,
    pub min_dist: usize,
    pub angular_deg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: Option<f64>,
    pub dist: Option<f64>,
    pub min_dist: Option<f64>,
    pub angular_deg: Option<f64>,
    pub n_samples: usize,
    pub n_skipped_per_metric: SkipCounts,
}

/// Scores one prediction. AUC and distance use the annotator average,
/// minimum distance the individual annotations. Out-of-frame records are
/// not scored.
pub fn evaluate_record(index: usize, pred: &Heatmap, record: &AnnotationRecord, cfg: &EvalConfig) -> RecordMetrics {
    let point = pred.peak_point();
    let mut m = RecordMetrics {
        index,
        image_path: record.image_path.clone(),
        pred_x: point.0,
        pred_y: point.1,
        auc: None,
        dist: None,
        min_dist: None,
        angular_deg: None,
        note: String::new(),
    };
    if !record.in_frame {
        m.note = "out of frame".into();
        return m;
    }
    let gt = record.mean_gaze();
    let mut notes = Vec::new();
    match gaussian_heatmap(gt, pred.width(), pred.height(), cfg.sigma)
        .and_then(|g| auc_score(pred, &g.binarize(cfg.binarize_threshold)))
    {
        Ok(a) => m.auc = Some(a),
        Err(e) => notes.push(format!("auc: {e}")),
    }
    m.dist = Some(l2_distance(point, gt));
    match min_distance(point, &record.gaze_points) {
        Ok(d) => m.min_dist = Some(d),
        Err(e) => notes.push(format!("min_dist: {e}")),
    }
    match angular_error(record.eye_normalized(), point, gt) {
        Ok(a) => m.angular_deg = Some(a),
        Err(e) => notes.push(format!("angular: {e}")),
    }
    m.note = notes.join("; ");
    m
}

/// Per-record metrics in input order.
pub fn evaluate_records(
    samples: &[(Heatmap, AnnotationRecord)],
    cfg: &EvalConfig,
    exec: Execution,
) -> Vec<RecordMetrics> {
    let indexed: Vec<(usize, &(Heatmap, AnnotationRecord))> = samples.iter().enumerate().collect();
    exec.map(&indexed, |(i, (pred, rec))| evaluate_record(*i, pred, rec, cfg))
}

/// Macro-averages per-record metrics, counting undefined ones per metric.
pub fn summarize(metrics: &[RecordMetrics]) -> EvalReport {
    fn collect(metrics: &[RecordMetrics], f: impl Fn(&RecordMetrics) -> Option<f64>) -> (Option<f64>, usize) {
        let vals: Vec<f64> = metrics.iter().filter_map(&f).collect();
        (pairwise_mean(&vals), metrics.len() - vals.len())
    }
    let (auc, s_auc) = collect(metrics, |m| m.auc);
    let (dist, s_dist) = collect(metrics, |m| m.dist);
    let (min_dist, s_min) = collect(metrics, |m| m.min_dist);
    let (angular_deg, s_ang) = collect(metrics, |m| m.angular_deg);
    EvalReport {
        auc,
        dist,
        min_dist,
        angular_deg,
        n_samples: metrics.len(),
        n_skipped_per_metric: SkipCounts {
            auc: s_auc,
            dist: s_dist,
            min_dist: s_min,
            angular_deg: s_ang,
        },
    }
}

pub fn evaluate(samples: &[(Heatmap, AnnotationRecord)], cfg: &EvalConfig, exec: Execution) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Argument("nothing to evaluate".into()));
    }
    Ok(summarize(&evaluate_records(samples, cfg, exec)))
}
