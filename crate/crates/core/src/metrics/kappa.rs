use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{percentile, MetricsError};
use crate::model::PredictionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn as_str(self) -> &'static str {
        match self {
            KappaBand::Poor => "poor",
            KappaBand::Slight => "slight",
            KappaBand::Fair => "fair",
            KappaBand::Moderate => "moderate",
            KappaBand::Substantial => "substantial",
            KappaBand::AlmostPerfect => "almost perfect",
        }
    }
}

impl fmt::Display for KappaBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Landis-Koch style agreement band. Upper edges are inclusive.
pub fn kappa_band(k: f64) -> Result<KappaBand, MetricsError> {
    if !(-1.0..=1.0).contains(&k) {
        return Err(MetricsError::OutOfRange(k));
    }
    Ok(if k < 0.0 {
        KappaBand::Poor
    } else if k <= 0.2 {
        KappaBand::Slight
    } else if k <= 0.4 {
        KappaBand::Fair
    } else if k <= 0.6 {
        KappaBand::Moderate
    } else if k <= 0.8 {
        KappaBand::Substantial
    } else {
        KappaBand::AlmostPerfect
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa {
    pub kappa: f64,
    pub band: KappaBand,
    /// Chance agreement was 1, so the ratio is undefined and a convention applies.
    pub degenerate: bool,
    pub n: usize,
}

/// Cohen's kappa for two aligned binary series.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<Kappa, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = a.len() as u128;
    let (mut agree, mut a1, mut b1) = (0u128, 0u128, 0u128);
    for (&x, &y) in a.iter().zip(b) {
        agree += u128::from(x == y);
        a1 += u128::from(x);
        b1 += u128::from(y);
    }
    // p_e * n^2 and p_o * n, kept integral so degeneracy is detected exactly
    let chance = a1 * b1 + (n - a1) * (n - b1);
    let (kappa, degenerate) = if chance == n * n {
        (if agree == n { 1.0 } else { 0.0 }, true)
    } else {
        let num = (n * agree) as f64 - chance as f64;
        let den = (n * n) as f64 - chance as f64;
        (num / den, false)
    };
    Ok(Kappa {
        kappa,
        band: kappa_band(kappa)?,
        degenerate,
        n: a.len(),
    })
}

/// Five-number-ish summary of per-label kappas for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaSummary {
    pub median: f64,
    pub iqr_low: f64,
    pub iqr_high: f64,
}

impl KappaSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            median: percentile(values, 50.0)?,
            iqr_low: percentile(values, 25.0)?,
            iqr_high: percentile(values, 75.0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairKappa {
    pub model_a: String,
    pub model_b: String,
    /// Reports predicted by both members.
    pub n_reports: usize,
    /// Empty when the pair shares no reports.
    pub per_label: Vec<(String, Kappa)>,
    pub summary: Option<KappaSummary>,
}

impl PairKappa {
    pub fn available(&self) -> bool {
        self.summary.is_some()
    }

    pub fn kappa(&self, label: &str) -> Option<&Kappa> {
        self.per_label.iter().find(|(l, _)| l == label).map(|(_, k)| k)
    }
}

/// Per-label kappa between two labelers over the reports both predicted.
pub fn pair_kappa(a: &PredictionSet, b: &PredictionSet, labels: &[String]) -> Result<PairKappa, MetricsError> {
    let shared: BTreeSet<&String> = a
        .predictions
        .keys()
        .filter(|id| b.predictions.contains_key(*id))
        .collect();
    let mut per_label = Vec::new();
    if !shared.is_empty() {
        for label in labels {
            let mut xs = Vec::with_capacity(shared.len());
            let mut ys = Vec::with_capacity(shared.len());
            for id in &shared {
                let get = |p: &PredictionSet| {
                    p.predictions[*id].get(label).ok_or_else(|| MetricsError::MissingLabel {
                        report_id: (*id).clone(),
                        label: label.clone(),
                    })
                };
                xs.push(get(a)?);
                ys.push(get(b)?);
            }
            per_label.push((label.clone(), cohen_kappa(&xs, &ys)?));
        }
    }
    let values: Vec<f64> = per_label.iter().map(|(_, k)| k.kappa).collect();
    Ok(PairKappa {
        model_a: a.labeler_name.clone(),
        model_b: b.labeler_name.clone(),
        n_reports: shared.len(),
        summary: KappaSummary::of(&values),
        per_label,
    })
}

/// Every unordered pair, in input order: (0,1), (0,2), ..., (1,2), ...
pub fn pairwise_kappa_matrix(preds: &[PredictionSet], labels: &[String]) -> Result<Vec<PairKappa>, MetricsError> {
    if preds.len() < 2 {
        return Err(MetricsError::TooFewLabelers(preds.len()));
    }
    let mut out = Vec::new();
    for i in 0..preds.len() {
        for j in i + 1..preds.len() {
            out.push(pair_kappa(&preds[i], &preds[j], labels)?);
        }
    }
    Ok(out)
}

/// Looks a pair up in either order.
pub fn find_pair<'a>(pairs: &'a [PairKappa], a: &str, b: &str) -> Option<&'a PairKappa> {
    pairs
        .iter()
        .find(|p| (p.model_a == a && p.model_b == b) || (p.model_a == b && p.model_b == a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(both: usize, a_only: usize, b_only: usize, neither: usize) -> (Vec<bool>, Vec<bool>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y, k) in [
            (true, true, both),
            (true, false, a_only),
            (false, true, b_only),
            (false, false, neither),
        ] {
            a.extend(std::iter::repeat_n(x, k));
            b.extend(std::iter::repeat_n(y, k));
        }
        (a, b)
    }

    #[test]
    fn hand_evaluated_table() {
        // p_o = 80/100, p_e = .5*.5 + .5*.5 = .5, kappa = .3/.5
        let (a, b) = table(40, 10, 10, 40);
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k.kappa - 0.6).abs() < 1e-12);
        // 0.6 is the inclusive top of the moderate band
        assert_eq!(k.band, KappaBand::Moderate);
        assert!(!k.degenerate);
    }

    #[test]
    fn identical_and_degenerate() {
        let (a, _) = table(3, 0, 0, 5);
        let k = cohen_kappa(&a, &a).unwrap();
        assert_eq!(k.kappa, 1.0);
        assert_eq!(k.band, KappaBand::AlmostPerfect);
        let zeros = vec![false; 6];
        let k = cohen_kappa(&zeros, &zeros).unwrap();
        assert_eq!((k.kappa, k.degenerate), (1.0, true));
    }

    #[test]
    fn bands() {
        assert_eq!(kappa_band(0.87).unwrap(), KappaBand::AlmostPerfect);
        assert_eq!(kappa_band(0.64).unwrap(), KappaBand::Substantial);
        assert_eq!(kappa_band(-0.1).unwrap(), KappaBand::Poor);
        assert_eq!(kappa_band(0.0).unwrap(), KappaBand::Slight);
        assert_eq!(kappa_band(0.2).unwrap(), KappaBand::Slight);
        assert_eq!(kappa_band(0.4).unwrap(), KappaBand::Fair);
        assert_eq!(kappa_band(0.6).unwrap(), KappaBand::Moderate);
        assert_eq!(kappa_band(0.8).unwrap(), KappaBand::Substantial);
        assert_eq!(kappa_band(0.81).unwrap(), KappaBand::AlmostPerfect);
        assert!(kappa_band(1.5).is_err());
        assert_eq!(KappaBand::AlmostPerfect.to_string(), "almost perfect");
    }

    #[test]
    fn errors() {
        assert_eq!(cohen_kappa(&[true], &[]), Err(MetricsError::LengthMismatch(1, 0)));
        assert_eq!(cohen_kappa(&[], &[]), Err(MetricsError::Empty));
    }

    fn naive_kappa(a: &[bool], b: &[bool]) -> f64 {
        let n = a.len() as f64;
        let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
        let pa = a.iter().filter(|x| **x).count() as f64 / n;
        let pb = b.iter().filter(|x| **x).count() as f64 / n;
        let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
        (po - pe) / (1.0 - pe)
    }

    proptest! {
        #[test]
        fn symmetric_and_flip_invariant(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let a: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            let k = cohen_kappa(&a, &b).unwrap();
            let k2 = cohen_kappa(&b, &a).unwrap();
            prop_assert!((k.kappa - k2.kappa).abs() < 1e-12);
            let na: Vec<bool> = a.iter().map(|x| !x).collect();
            let nb: Vec<bool> = b.iter().map(|x| !x).collect();
            prop_assert!((cohen_kappa(&na, &nb).unwrap().kappa - k.kappa).abs() < 1e-12);
            let po = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
            prop_assert!(k.kappa <= po + 1e-12);
            if !k.degenerate {
                prop_assert!((k.kappa - naive_kappa(&a, &b)).abs() < 1e-9);
                prop_assert_eq!(k.kappa == 1.0, a == b);
            }
        }
    }
}
