use serde::Serialize;

use super::f1::ConfusionCounts;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub threshold: f64,
    pub f1: f64,
    /// All scores were equal, so no cut point separates anything.
    pub degenerate: bool,
}

/// 0, 1, and the midpoints between adjacent distinct scores, ascending.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = vec![0.0];
    out.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    out.push(1.0);
    out.dedup();
    out
}

pub fn f1_at(scores: &[f64], truth: &[bool], threshold: f64) -> f64 {
    let mut c = ConfusionCounts::default();
    for (&s, &t) in scores.iter().zip(truth) {
        c.add(s >= threshold, t);
    }
    c.f1().0
}

/// The F1-maximizing cut point for one label; a score at or above the
/// threshold predicts positive. Ties go to the lowest threshold.
pub fn select_threshold(scores: &[f64], truth: &[bool]) -> Result<Threshold, MetricsError> {
    if scores.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), truth.len()));
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricsError::OutOfRange(bad));
    }
    if scores.iter().all(|&s| s == scores[0]) {
        return Ok(Threshold {
            threshold: 0.5,
            f1: f1_at(scores, truth, 0.5),
            degenerate: true,
        });
    }
    let mut best = Threshold {
        threshold: 0.0,
        f1: f64::NEG_INFINITY,
        degenerate: false,
    };
    for t in candidate_thresholds(scores) {
        let f1 = f1_at(scores, truth, t);
        if f1 > best.f1 {
            best = Threshold {
                threshold: t,
                f1,
                degenerate: false,
            };
        }
    }
    Ok(best)
}

/// One threshold per label; `scores[j]` and `truth[j]` are label j's columns.
pub fn select_thresholds<S: AsRef<str>>(
    labels: &[S],
    scores: &[Vec<f64>],
    truth: &[Vec<bool>],
) -> Result<Vec<(String, Threshold)>, MetricsError> {
    if labels.len() != scores.len() || labels.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), truth.len()));
    }
    labels
        .iter()
        .zip(scores.iter().zip(truth))
        .map(|(l, (s, t))| Ok((l.as_ref().to_string(), select_threshold(s, t)?)))
        .collect()
}
