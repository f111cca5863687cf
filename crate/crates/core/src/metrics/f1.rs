use std::collections::BTreeMap;

use serde::Serialize;

use super::MetricsError;
use crate::model::{LabelVector, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// 2TP / (2TP + FP + FN); 0 with the zero-division flag when nothing
    /// was predicted or present.
    pub fn f1(&self) -> (f64, bool) {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            (0.0, true)
        } else {
            ((2 * self.tp) as f64 / den as f64, false)
        }
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// Predictions and reference labels aligned into dense rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalTable {
    pub labels: Vec<String>,
    pub report_ids: Vec<String>,
    /// `pred[i][j]`: report i, label j.
    pub pred: Vec<Vec<bool>>,
    pub truth: Vec<Vec<bool>>,
    /// Reference reports the labeler errored on; left out of every count.
    pub excluded: Vec<String>,
}

impl EvalTable {
    /// Aligns `pred` with `truth` on the truth ids. Predictions for reports
    /// outside the reference set are ignored.
    pub fn build(
        pred: &PredictionSet,
        truth: &BTreeMap<String, LabelVector>,
        labels: &[String],
    ) -> Result<Self, MetricsError> {
        let mut table = EvalTable {
            labels: labels.to_vec(),
            report_ids: Vec::new(),
            pred: Vec::new(),
            truth: Vec::new(),
            excluded: Vec::new(),
        };
        for (id, t) in truth {
            let Some(p) = pred.predictions.get(id) else {
                if pred.is_error(id) {
                    table.excluded.push(id.clone());
                    continue;
                }
                return Err(MetricsError::MissingReport(id.clone()));
            };
            let row = |v: &LabelVector| {
                labels
                    .iter()
                    .map(|l| {
                        v.get(l).ok_or_else(|| MetricsError::MissingLabel {
                            report_id: id.clone(),
                            label: l.clone(),
                        })
                    })
                    .collect::<Result<Vec<bool>, _>>()
            };
            table.pred.push(row(p)?);
            table.truth.push(row(t)?);
            table.report_ids.push(id.clone());
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.report_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.report_ids.is_empty()
    }

    /// Per-label counts over the given rows (rows may repeat).
    pub fn counts(&self, rows: impl IntoIterator<Item = usize>) -> Vec<ConfusionCounts> {
        let mut out = vec![ConfusionCounts::default(); self.labels.len()];
        for i in rows {
            for (j, c) in out.iter_mut().enumerate() {
                c.add(self.pred[i][j], self.truth[i][j]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub label: String,
    pub counts: ConfusionCounts,
    pub f1: f64,
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1Report {
    pub per_label: Vec<LabelScore>,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub micro_counts: ConfusionCounts,
    pub evaluated: usize,
    pub excluded: Vec<String>,
}

/// (per-label F1, macro, micro) from per-label counts.
pub fn summarize(counts: &[ConfusionCounts]) -> (Vec<f64>, f64, f64) {
    let per: Vec<f64> = counts.iter().map(|c| c.f1().0).collect();
    let macro_f1 = if per.is_empty() {
        0.0
    } else {
        per.iter().sum::<f64>() / per.len() as f64
    };
    let mut pooled = ConfusionCounts::default();
    for c in counts {
        pooled += *c;
    }
    (per, macro_f1, pooled.f1().0)
}

pub fn f1_from_table(table: &EvalTable) -> F1Report {
    let counts = table.counts(0..table.len());
    let (_, macro_f1, micro_f1) = summarize(&counts);
    let mut micro_counts = ConfusionCounts::default();
    for c in &counts {
        micro_counts += *c;
    }
    F1Report {
        per_label: table
            .labels
            .iter()
            .zip(&counts)
            .map(|(label, c)| {
                let (f1, zero_division) = c.f1();
                LabelScore {
                    label: label.clone(),
                    counts: *c,
                    f1,
                    zero_division,
                }
            })
            .collect(),
        macro_f1,
        micro_f1,
        micro_counts,
        evaluated: table.len(),
        excluded: table.excluded.clone(),
    }
}

/// Per-label, macro and micro F1 of `pred` against reference labels.
pub fn f1_scores(
    pred: &PredictionSet,
    truth: &BTreeMap<String, LabelVector>,
    labels: &[String],
) -> Result<F1Report, MetricsError> {
    Ok(f1_from_table(&EvalTable::build(pred, truth, labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelSchema, PredictionStatus};
    use proptest::prelude::*;

    fn one_label(pairs: &[(bool, bool)]) -> (PredictionSet, BTreeMap<String, LabelVector>) {
        let mut pred = PredictionSet::new("p");
        let mut truth = BTreeMap::new();
        for (i, (p, t)) in pairs.iter().enumerate() {
            let id = format!("r{i:03}");
            pred.insert(
                id.clone(),
                LabelVector::from_decisions([("X", *p)]),
                PredictionStatus::Ok,
            )
            .unwrap();
            truth.insert(id, LabelVector::from_decisions([("X", *t)]));
        }
        (pred, truth)
    }

    #[test]
    fn eight_two_two() {
        let mut pairs = vec![(true, true); 8];
        pairs.extend([(true, false); 2]);
        pairs.extend([(false, true); 2]);
        pairs.extend([(false, false); 5]);
        let (pred, truth) = one_label(&pairs);
        let r = f1_scores(&pred, &truth, &["X".into()]).unwrap();
        let c = r.per_label[0].counts;
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (8, 2, 2, 5));
        assert!((r.per_label[0].f1 - 0.8).abs() < 1e-12);
        assert!((r.micro_f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_zero_division() {
        let schema = LabelSchema::canonical();
        let mut pred = PredictionSet::new("p");
        let mut truth = BTreeMap::new();
        let mut v = LabelVector::zeros(&schema);
        v.set("Gallstones", true);
        pred.insert("r1", v.clone(), PredictionStatus::Ok).unwrap();
        truth.insert("r1".to_string(), v);
        let r = f1_scores(&pred, &truth, &["Gallstones".into()]).unwrap();
        assert_eq!((r.per_label[0].f1, r.macro_f1, r.micro_f1), (1.0, 1.0, 1.0));
        let r = f1_scores(&pred, &truth, &["Kidney Cyst".into()]).unwrap();
        assert_eq!(r.per_label[0].f1, 0.0);
        assert!(r.per_label[0].zero_division);
    }

    #[test]
    fn errored_reports_are_excluded_and_missing_fail() {
        let (mut pred, mut truth) = one_label(&[(true, true)]);
        pred.insert_error("gone", "transport").unwrap();
        truth.insert("gone".into(), LabelVector::from_decisions([("X", true)]));
        let r = f1_scores(&pred, &truth, &["X".into()]).unwrap();
        assert_eq!(r.excluded, ["gone"]);
        assert_eq!(r.evaluated, 1);
        truth.insert("never".into(), LabelVector::from_decisions([("X", true)]));
        assert_eq!(
            f1_scores(&pred, &truth, &["X".into()]),
            Err(MetricsError::MissingReport("never".into()))
        );
    }

    proptest! {
        #[test]
        fn macro_is_mean_and_single_label_micro(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 6), 1..40)) {
            let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
            let mut pred = PredictionSet::new("p");
            let mut truth = BTreeMap::new();
            for (i, r) in rows.iter().enumerate() {
                let id = format!("r{i}");
                pred.insert(id.clone(), LabelVector::from_decisions(labels.iter().cloned().zip(r[..3].iter().copied())), PredictionStatus::Ok).unwrap();
                truth.insert(id, LabelVector::from_decisions(labels.iter().cloned().zip(r[3..].iter().copied())));
            }
            let all = f1_scores(&pred, &truth, &labels).unwrap();
            let mean = all.per_label.iter().map(|s| s.f1).sum::<f64>() / 3.0;
            prop_assert!((all.macro_f1 - mean).abs() < 1e-12);
            for l in &labels {
                let single = f1_scores(&pred, &truth, std::slice::from_ref(l)).unwrap();
                prop_assert!((single.micro_f1 - single.per_label[0].f1).abs() < 1e-12);
            }
            prop_assert_eq!(all.micro_counts.total(), rows.len() * 3);
        }
    }
}
