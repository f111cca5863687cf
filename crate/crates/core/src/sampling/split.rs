//! Patient-exclusive train/test split by iterative stratification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SamplingError;
use crate::metrics::fmt6;
use crate::model::LabelVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Train => "train",
            Side::Test => "test",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One report to split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitItem<'a> {
    pub report_id: &'a str,
    pub patient_id: &'a str,
    pub labels: &'a LabelVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDeviation {
    pub label: String,
    pub overall_rate: f64,
    pub train_rate: f64,
    pub test_rate: f64,
    /// |test rate − overall rate| in percentage points.
    pub deviation_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAssignment {
    pub patients: BTreeMap<String, Side>,
    pub reports: BTreeMap<String, Side>,
    /// Report order of the input, kept for output.
    pub report_patients: Vec<(String, String)>,
    pub deviations: Vec<LabelDeviation>,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn max_deviation_pp(&self) -> f64 {
        self.deviations.iter().map(|d| d.deviation_pp).fold(0.0, f64::max)
    }

    pub fn side_of(&self, report_id: &str) -> Option<Side> {
        self.reports.get(report_id).copied()
    }

    pub fn count(&self, side: Side) -> usize {
        self.reports.values().filter(|s| **s == side).count()
    }

    /// `report_id,patient_id,side` rows in input order.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["report_id", "patient_id", "side"])?;
        for (r, p) in &self.report_patients {
            w.write_record([r.as_str(), p.as_str(), self.reports[r].as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_deviation_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "overall_rate", "train_rate", "test_rate", "deviation_pp"])?;
        for d in &self.deviations {
            w.write_record([
                d.label.clone(),
                fmt6(d.overall_rate),
                fmt6(d.train_rate),
                fmt6(d.test_rate),
                fmt6(d.deviation_pp),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Patient {
    id: String,
    reports: usize,
    /// Positive report count per label index.
    positives: Vec<usize>,
}

struct SideState {
    capacity: f64,
    demand: Vec<f64>,
}

/// Splits patients so every report of a patient lands on one side and each
/// label's positive rate on both sides tracks the corpus rate.
///
/// Labels are processed rarest first (fewest unassigned positive patients).
/// Each positive patient goes to the side that still needs the most of that
/// label, then the side with more room, then a seeded coin flip. Patients
/// with no positives fill remaining capacity last. A local search then
/// trades patients across sides while that brings the test side closer to
/// its size and per-label targets.
pub fn stratified_patient_split<S: AsRef<str>>(
    items: &[SplitItem<'_>],
    labels: &[S],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment, SamplingError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SamplingError::Fraction(train_fraction));
    }
    let k = labels.len();
    let mut by_patient: BTreeMap<&str, Patient> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.report_id) {
            return Err(SamplingError::DuplicateReport(item.report_id.to_string()));
        }
        let p = by_patient.entry(item.patient_id).or_insert_with(|| Patient {
            id: item.patient_id.to_string(),
            reports: 0,
            positives: vec![0; k],
        });
        p.reports += 1;
        for (j, l) in labels.iter().enumerate() {
            p.positives[j] += usize::from(item.labels.is_positive(l.as_ref()));
        }
    }
    let mut patients: Vec<Patient> = by_patient.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);

    let total_reports = items.len() as f64;
    let label_totals: Vec<usize> = (0..k).map(|j| patients.iter().map(|p| p.positives[j]).sum()).collect();
    let fractions = [train_fraction, 1.0 - train_fraction];
    let mut sides: Vec<SideState> = fractions
        .iter()
        .map(|f| SideState {
            capacity: f * total_reports,
            demand: label_totals.iter().map(|&t| f * t as f64).collect(),
        })
        .collect();

    let mut assigned: Vec<Option<usize>> = vec![None; patients.len()];
    let pick = |sides: &[SideState], label: Option<usize>, rng: &mut ChaCha8Rng| -> usize {
        if let Some(j) = label {
            if sides[0].demand[j] != sides[1].demand[j] {
                return if sides[0].demand[j] > sides[1].demand[j] { 0 } else { 1 };
            }
        }
        if sides[0].capacity != sides[1].capacity {
            return if sides[0].capacity > sides[1].capacity { 0 } else { 1 };
        }
        usize::from(rng.random_bool(0.5))
    };
    let place = |side: usize, p: &Patient, sides: &mut [SideState]| {
        sides[side].capacity -= p.reports as f64;
        for (j, &c) in p.positives.iter().enumerate() {
            sides[side].demand[j] -= c as f64;
        }
    };

    loop {
        // rarest label among unassigned patients
        let mut rarest: Option<(usize, usize)> = None;
        for j in 0..k {
            let n = patients
                .iter()
                .zip(&assigned)
                .filter(|(p, a)| a.is_none() && p.positives[j] > 0)
                .count();
            if n > 0 && rarest.is_none_or(|(_, best)| n < best) {
                rarest = Some((j, n));
            }
        }
        let Some((j, _)) = rarest else { break };
        for i in 0..patients.len() {
            if assigned[i].is_none() && patients[i].positives[j] > 0 {
                let side = pick(&sides, Some(j), &mut rng);
                place(side, &patients[i], &mut sides);
                assigned[i] = Some(side);
            }
        }
    }
    for i in 0..patients.len() {
        if assigned[i].is_none() {
            let side = pick(&sides, None, &mut rng);
            place(side, &patients[i], &mut sides);
            assigned[i] = Some(side);
        }
    }
    let mut assigned: Vec<usize> = assigned.into_iter().map(|a| a.expect("all assigned")).collect();
    let targets: Vec<f64> = std::iter::once(fractions[1] * total_reports)
        .chain(label_totals.iter().map(|&t| fractions[1] * t as f64))
        .collect();
    refine(&patients, &mut assigned, &targets);

    let to_side = |s: usize| if s == 0 { Side::Train } else { Side::Test };
    let patient_sides: BTreeMap<String, Side> = patients
        .iter()
        .zip(&assigned)
        .map(|(p, &a)| (p.id.clone(), to_side(a)))
        .collect();
    let reports: BTreeMap<String, Side> = items
        .iter()
        .map(|it| (it.report_id.to_string(), patient_sides[it.patient_id]))
        .collect();

    let mut warnings = Vec::new();
    if patient_sides.len() < 2 {
        warnings.push(format!(
            "only {} patient(s); the split is one-sided",
            patient_sides.len()
        ));
    }
    let deviations = label_deviations(items, labels, &reports);
    Ok(SplitAssignment {
        patients: patient_sides,
        reports,
        report_patients: items
            .iter()
            .map(|it| (it.report_id.to_string(), it.patient_id.to_string()))
            .collect(),
        deviations,
        warnings,
    })
}

const REFINE_PASSES: usize = 20;
// every rate on the test side moves with its size, so size errors cost more
const SIZE_WEIGHT: f64 = 4.0;

/// Local search after the greedy pass: moves single patients across sides,
/// then swaps train/test pairs, whenever that lowers the squared distance of
/// the test side's (size, per-label positives) from `targets`. Deterministic.
fn refine(patients: &[Patient], assigned: &mut [usize], targets: &[f64]) {
    let vec_of = |p: &Patient| -> Vec<f64> {
        std::iter::once(p.reports as f64)
            .chain(p.positives.iter().map(|&c| c as f64))
            .collect()
    };
    let contrib: Vec<Vec<f64>> = patients.iter().map(vec_of).collect();
    let mut test = vec![0.0; targets.len()];
    for (c, &a) in contrib.iter().zip(assigned.iter()) {
        if a == 1 {
            test.iter_mut().zip(c).for_each(|(t, x)| *t += x);
        }
    }
    // change in squared error when `delta` is added to the test totals
    let gain = |test: &[f64], delta: &dyn Fn(usize) -> f64| -> f64 {
        test.iter()
            .zip(targets)
            .enumerate()
            .map(|(d, (t, g))| {
                let w = if d == 0 { SIZE_WEIGHT } else { 1.0 };
                let now = t - g;
                let next = now + delta(d);
                w * (next.powi(4) - now.powi(4))
            })
            .sum()
    };
    const EPS: f64 = 1e-9;
    for _ in 0..REFINE_PASSES {
        let mut improved = false;
        for i in 0..patients.len() {
            let sign = if assigned[i] == 1 { -1.0 } else { 1.0 };
            if gain(&test, &|d| sign * contrib[i][d]) < -EPS {
                test.iter_mut().zip(&contrib[i]).for_each(|(t, x)| *t += sign * x);
                assigned[i] = 1 - assigned[i];
                improved = true;
            }
        }
        for i in 0..patients.len() {
            if assigned[i] != 1 {
                continue;
            }
            for j in 0..patients.len() {
                if assigned[j] != 0 {
                    continue;
                }
                if gain(&test, &|d| contrib[j][d] - contrib[i][d]) < -EPS {
                    test.iter_mut()
                        .enumerate()
                        .for_each(|(d, t)| *t += contrib[j][d] - contrib[i][d]);
                    assigned[i] = 0;
                    assigned[j] = 1;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

fn label_deviations<S: AsRef<str>>(
    items: &[SplitItem<'_>],
    labels: &[S],
    reports: &BTreeMap<String, Side>,
) -> Vec<LabelDeviation> {
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let n_test = items.iter().filter(|it| reports[it.report_id] == Side::Test).count();
    let n_train = items.len() - n_test;
    labels
        .iter()
        .map(|l| {
            let l = l.as_ref();
            let (mut all, mut test) = (0, 0);
            for it in items {
                if it.labels.is_positive(l) {
                    all += 1;
                    test += usize::from(reports[it.report_id] == Side::Test);
                }
            }
            let overall_rate = rate(all, items.len());
            let test_rate = rate(test, n_test);
            LabelDeviation {
                label: l.to_string(),
                overall_rate,
                train_rate: rate(all - test, n_train),
                test_rate,
                deviation_pp: (test_rate - overall_rate).abs() * 100.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors(bits: &[bool]) -> Vec<LabelVector> {
        bits.iter().map(|&b| LabelVector::from_decisions([("x", b)])).collect()
    }

    #[test]
    fn four_positives_split_evenly() {
        let vs = vectors(&[true, true, true, true, false, false, false, false, false, false]);
        let ids: Vec<(String, String)> = (0..10).map(|i| (format!("r{i}"), format!("p{i}"))).collect();
        for seed in 0..20 {
            let items: Vec<SplitItem> = ids
                .iter()
                .zip(&vs)
                .map(|((r, p), v)| SplitItem {
                    report_id: r,
                    patient_id: p,
                    labels: v,
                })
                .collect();
            let s = stratified_patient_split(&items, &["x"], 0.5, seed).unwrap();
            let test_pos = (0..4).filter(|i| s.reports[&format!("r{i}")] == Side::Test).count();
            assert_eq!(test_pos, 2, "seed {seed}");
            assert_eq!(s.count(Side::Test), 5);
        }
    }

    #[test]
    fn patient_reports_stay_together_and_seed_is_stable() {
        let vs = vectors(&[true, false, false, true, false, true]);
        let pairs = [
            ("a", "p1"),
            ("b", "p1"),
            ("c", "p1"),
            ("d", "p2"),
            ("e", "p3"),
            ("f", "p4"),
        ];
        let items: Vec<SplitItem> = pairs
            .iter()
            .zip(&vs)
            .map(|((r, p), v)| SplitItem {
                report_id: r,
                patient_id: p,
                labels: v,
            })
            .collect();
        let s = stratified_patient_split(&items, &["x"], 0.5, 3).unwrap();
        assert_eq!(s.reports["a"], s.reports["b"]);
        assert_eq!(s.reports["b"], s.reports["c"]);
        assert_eq!(s, stratified_patient_split(&items, &["x"], 0.5, 3).unwrap());
    }

    #[test]
    fn single_patient_warns() {
        let vs = vectors(&[true]);
        let items = [SplitItem {
            report_id: "r",
            patient_id: "p",
            labels: &vs[0],
        }];
        let s = stratified_patient_split(&items, &["x"], 0.8, 1).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn rejects_bad_fraction() {
        assert_eq!(
            stratified_patient_split::<&str>(&[], &[], 1.0, 1),
            Err(SamplingError::Fraction(1.0))
        );
    }
}
