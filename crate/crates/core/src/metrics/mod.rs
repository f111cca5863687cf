//! Agreement and accuracy statistics.

mod bootstrap;
mod f1;
mod kappa;
mod prevalence;
mod thresholds;

use std::io::Write;

use thiserror::Error;

pub use bootstrap::{
    bootstrap_ci, bootstrap_f1, resample_indices, F1Intervals, MetricWithCI, DEFAULT_LEVEL, DEFAULT_RESAMPLES,
};
pub use f1::{f1_from_table, f1_scores, summarize, ConfusionCounts, EvalTable, F1Report, LabelScore};
pub use kappa::{
    cohen_kappa, find_pair, kappa_band, pair_kappa, pairwise_kappa_matrix, Kappa, KappaBand, KappaSummary, PairKappa,
};
pub use prevalence::{prevalence_table, PrevalenceRow, PrevalenceTable};
pub use thresholds::{candidate_thresholds, f1_at, select_threshold, select_thresholds, Threshold};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("value {0} is out of range")]
    OutOfRange(f64),
    #[error("reference report {0:?} is missing from the predictions")]
    MissingReport(String),
    #[error("report {report_id:?} has no value for label {label:?}")]
    MissingLabel { report_id: String, label: String },
    #[error("need at least two labelers, got {0}")]
    TooFewLabelers(usize),
    #[error("resample count must be at least 1")]
    NoResamples,
    #[error("confidence level must be in (0, 1), got {0}")]
    Level(f64),
}

/// Linear-interpolation percentile (the common numerical-library default).
/// `p` is in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p.clamp(0.0, 100.0) / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

/// Six-decimal rendering used in every CSV.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// Metrics CSV: one row per label, then `macro` and `micro` rows.
pub fn write_metrics_csv<W: Write>(report: &F1Report, intervals: Option<&F1Intervals>, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "tp", "fp", "fn", "tn", "f1", "ci_low", "ci_high"])?;
    let ci = |m: Option<&MetricWithCI>| match m {
        Some(m) => (fmt6(m.ci_low), fmt6(m.ci_high)),
        None => (String::new(), String::new()),
    };
    for (j, s) in report.per_label.iter().enumerate() {
        let (lo, hi) = ci(intervals.map(|i| &i.per_label[j]));
        let c = s.counts;
        w.write_record([
            s.label.clone(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            fmt6(s.f1),
            lo,
            hi,
        ])?;
    }
    let (lo, hi) = ci(intervals.map(|i| &i.macro_f1));
    w.write_record(["macro", "", "", "", "", &fmt6(report.macro_f1), &lo, &hi])?;
    let c = report.micro_counts;
    let (lo, hi) = ci(intervals.map(|i| &i.micro_f1));
    w.write_record([
        "micro".to_string(),
        c.tp.to_string(),
        c.fp.to_string(),
        c.fn_.to_string(),
        c.tn.to_string(),
        fmt6(report.micro_f1),
        lo,
        hi,
    ])?;
    w.flush()?;
    Ok(())
}

/// Kappa CSV: per-label rows for each pair followed by that pair's summary row.
pub fn write_kappa_csv<W: Write>(pairs: &[PairKappa], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model_a",
        "model_b",
        "label",
        "kappa",
        "band",
        "median",
        "iqr_low",
        "iqr_high",
        "degenerate",
    ])?;
    for p in pairs {
        for (label, k) in &p.per_label {
            w.write_record([
                p.model_a.as_str(),
                p.model_b.as_str(),
                label,
                &fmt6(k.kappa),
                k.band.as_str(),
                "",
                "",
                "",
                if k.degenerate { "true" } else { "false" },
            ])?;
        }
        match &p.summary {
            Some(s) => {
                let band = kappa_band(s.median).map(|b| b.as_str()).unwrap_or("");
                w.write_record([
                    p.model_a.as_str(),
                    p.model_b.as_str(),
                    "summary",
                    "",
                    band,
                    &fmt6(s.median),
                    &fmt6(s.iqr_low),
                    &fmt6(s.iqr_high),
                    "",
                ])?;
            }
            None => {
                w.write_record([
                    p.model_a.as_str(),
                    p.model_b.as_str(),
                    "summary",
                    "",
                    "unavailable",
                    "",
                    "",
                    "",
                    "",
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_linear_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), Some(2.5));
        assert_eq!(percentile(&v, 25.0), Some(1.75));
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&v, 100.0), Some(4.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn six_decimals() {
        assert_eq!(fmt6(2.0 / 3.0), "0.666667");
        assert_eq!(fmt6(1.0), "1.000000");
    }
}
