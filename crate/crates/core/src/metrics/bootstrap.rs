//! Percentile bootstrap with a portable resampling protocol.
//!
//! Resample `r` draws its indices from a ChaCha8 generator seeded with
//! `seed` on stream `r`; each index is `next_u64() % n`. Any implementation
//! following that protocol reproduces the same resamples.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::f1::{summarize, EvalTable};
use super::{percentile, MetricsError};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricWithCI {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Indices of resample `r` over `n` items.
pub fn resample_indices(seed: u64, r: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    (0..n).map(|_| (rng.next_u64() % n as u64) as usize).collect()
}

fn check(n: usize, resamples: usize, level: f64) -> Result<(), MetricsError> {
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    if resamples == 0 {
        return Err(MetricsError::NoResamples);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::Level(level));
    }
    Ok(())
}

fn interval(point: f64, values: &[f64], level: f64, resamples: usize, seed: u64) -> MetricWithCI {
    let tail = (1.0 - level) / 2.0 * 100.0;
    MetricWithCI {
        point,
        ci_low: percentile(values, tail).expect("non-empty"),
        ci_high: percentile(values, 100.0 - tail).expect("non-empty"),
        resamples,
        seed,
    }
}

/// Bootstraps any statistic of `n` items given as a function of row indices.
pub fn bootstrap_ci<F>(
    n: usize,
    metric: F,
    resamples: usize,
    seed: u64,
    level: f64,
) -> Result<MetricWithCI, MetricsError>
where
    F: Fn(&[usize]) -> f64,
{
    check(n, resamples, level)?;
    let all: Vec<usize> = (0..n).collect();
    let point = metric(&all);
    let values: Vec<f64> = (0..resamples).map(|r| metric(&resample_indices(seed, r, n))).collect();
    Ok(interval(point, &values, level, resamples, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Intervals {
    /// Same order as the table's labels.
    pub per_label: Vec<MetricWithCI>,
    pub macro_f1: MetricWithCI,
    pub micro_f1: MetricWithCI,
}

/// Intervals for every per-label F1 plus macro and micro, all computed from
/// the same resamples.
pub fn bootstrap_f1(table: &EvalTable, resamples: usize, seed: u64, level: f64) -> Result<F1Intervals, MetricsError> {
    let n = table.len();
    check(n, resamples, level)?;
    let (point_per, point_macro, point_micro) = summarize(&table.counts(0..n));
    let k = table.labels.len();
    let mut per: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); k];
    let mut macros = Vec::with_capacity(resamples);
    let mut micros = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let (f1s, m, u) = summarize(&table.counts(resample_indices(seed, r, n)));
        for (j, f) in f1s.into_iter().enumerate() {
            per[j].push(f);
        }
        macros.push(m);
        micros.push(u);
    }
    Ok(F1Intervals {
        per_label: per
            .iter()
            .zip(point_per)
            .map(|(values, point)| interval(point, values, level, resamples, seed))
            .collect(),
        macro_f1: interval(point_macro, &macros, level, resamples, seed),
        micro_f1: interval(point_micro, &micros, level, resamples, seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_metric_gives_point_interval() {
        let ci = bootstrap_ci(10, |_| 0.42, 50, 7, 0.95).unwrap();
        assert_eq!((ci.point, ci.ci_low, ci.ci_high), (0.42, 0.42, 0.42));
    }

    #[test]
    fn deterministic_under_seed() {
        let data: Vec<f64> = (0..25).map(|i| (i * 7 % 11) as f64).collect();
        let mean = |idx: &[usize]| idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64;
        let a = bootstrap_ci(data.len(), mean, 300, 99, 0.95).unwrap();
        let b = bootstrap_ci(data.len(), mean, 300, 99, 0.95).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.ci_high);
        let c = bootstrap_ci(data.len(), mean, 300, 100, 0.95).unwrap();
        assert_ne!((a.ci_low, a.ci_high), (c.ci_low, c.ci_high));
    }

    #[test]
    fn streams_differ_and_stay_in_range() {
        let a = resample_indices(1, 0, 50);
        let b = resample_indices(1, 1, 50);
        assert_ne!(a, b);
        assert!(a.iter().all(|&i| i < 50));
        assert_eq!(a, resample_indices(1, 0, 50));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(bootstrap_ci(0, |_| 0.0, 10, 1, 0.95), Err(MetricsError::Empty));
        assert_eq!(bootstrap_ci(3, |_| 0.0, 0, 1, 0.95), Err(MetricsError::NoResamples));
        assert!(bootstrap_ci(3, |_| 0.0, 3, 1, 1.0).is_err());
    }
}
