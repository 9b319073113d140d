//! Per-class precision/recall reports, precision-recall curves over score
//! thresholds, and precision-targeted threshold tuning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Metrics for one class. Ratios with zero denominators are `None`, never a
/// silent zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub support: u64,
}

/// Two-class report with the confusion counts it was derived from.
/// Class 1 is the anomaly class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub method: String,
    pub threshold: Option<f64>,
    pub normal: ClassMetrics,
    pub anomaly: ClassMetrics,
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ClassReport {
    pub fn named(mut self, method: &str, threshold: Option<f64>) -> Self {
        self.method = method.to_string();
        self.threshold = threshold;
        self
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Confusion counts and per-class precision/recall of binary predictions.
pub fn precision_recall(predictions: &[bool], labels: &[u8]) -> Result<ClassReport> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("empty prediction list".into()));
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut tn = 0u64;
    let mut fn_ = 0u64;
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, 1) => tp += 1,
            (true, _) => fp += 1,
            (false, 1) => fn_ += 1,
            (false, _) => tn += 1,
        }
    }
    Ok(ClassReport {
        method: String::new(),
        threshold: None,
        normal: ClassMetrics {
            precision: ratio(tn, tn + fn_),
            recall: ratio(tn, tn + fp),
            support: tn + fp,
        },
        anomaly: ClassMetrics {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            support: tp + fn_,
        },
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}

/// One operating point of a score-thresholded classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Anomaly-class precision/recall at every distinct score, thresholds
/// descending. Prediction rule: score ≥ threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

/// Exact PR curve with one point per distinct score value; tied scores
/// collapse into a single threshold.
pub fn pr_curve<S: Scalar>(scores: &[S], labels: &[u8]) -> Result<PrCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives: u64 = labels.iter().filter(|&&y| y == 1).count() as u64;
    if positives == 0 {
        return Err(Error::InvalidArgument(
            "pr curve needs at least one positive label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut points = Vec::new();
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0usize;
    while i < order.len() {
        let threshold = scores[order[i]];
        // absorb the whole tie group before emitting a point
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold: threshold.to_f64_lossless(),
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    Ok(PrCurve { points })
}

/// Pick the threshold that maximizes anomaly recall subject to anomaly
/// precision ≥ target; ties prefer the lower threshold. Fails when no
/// threshold reaches the target, reporting the best achievable precision.
pub fn tune_threshold<S: Scalar>(
    scores: &[S],
    labels: &[u8],
    target_precision: f64,
) -> Result<(f64, ClassReport)> {
    if !(0.0 < target_precision && target_precision <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target precision {target_precision} outside (0, 1]"
        )));
    }
    let curve = pr_curve(scores, labels)?;
    let mut best: Option<&PrPoint> = None;
    for p in &curve.points {
        if p.precision < target_precision {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                p.recall > b.recall || (p.recall == b.recall && p.threshold < b.threshold)
            }
        };
        if better {
            best = Some(p);
        }
    }
    let Some(point) = best else {
        let max = curve
            .points
            .iter()
            .map(|p| p.precision)
            .fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::TargetUnachievable {
            target: target_precision,
            max,
        });
    };
    let threshold = point.threshold;
    let predictions: Vec<bool> = scores
        .iter()
        .map(|s| s.to_f64_lossless() >= threshold)
        .collect();
    let report = precision_recall(&predictions, labels)?;
    Ok((threshold, report.named("", Some(threshold))))
}

/// Relative anomaly-recall improvement of one method over another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallImprovement {
    pub method: String,
    pub baseline: String,
    /// (r_method − r_baseline) / r_baseline
    pub relative: f64,
}

/// Side-by-side report table with pairwise recall improvements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<ClassReport>,
    pub improvements: Vec<RecallImprovement>,
}

/// Compare reports pairwise. Rows keep input order; every ordered pair with
/// defined, nonzero baseline recall contributes an improvement entry.
pub fn compare_methods(reports: &[ClassReport]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(
            "comparison needs at least two reports".into(),
        ));
    }
    let mut improvements = Vec::new();
    for a in reports {
        for b in reports {
            if std::ptr::eq(a, b) {
                continue;
            }
            if let (Some(ra), Some(rb)) = (a.anomaly.recall, b.anomaly.recall) {
                if rb > 0.0 {
                    improvements.push(RecallImprovement {
                        method: a.method.clone(),
                        baseline: b.method.clone(),
                        relative: (ra - rb) / rb,
                    });
                }
            }
        }
    }
    Ok(Comparison {
        reports: reports.to_vec(),
        improvements,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "undef".to_string(),
    }
}

/// Render a comparison as an aligned text table plus improvement lines.
pub fn render_text(comparison: &Comparison) -> String {
    let mut out = String::new();
    let header = format!(
        "{:<12} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "method", "prec(0)", "rec(0)", "sup(0)", "prec(1)", "rec(1)", "sup(1)", "threshold"
    );
    out.push_str(&header);
    for r in &comparison.reports {
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            r.method,
            fmt_opt(r.normal.precision),
            fmt_opt(r.normal.recall),
            r.normal.support,
            fmt_opt(r.anomaly.precision),
            fmt_opt(r.anomaly.recall),
            r.anomaly.support,
            r.threshold.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into()),
        ));
    }
    for imp in &comparison.improvements {
        out.push_str(&format!(
            "recall improvement of {} over {}: {:+.1}%\n",
            imp.method,
            imp.baseline,
            imp.relative * 100.0
        ));
    }
    out
}
