//! Unweighted majority vote over several labelers.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use thiserror::Error;

use crate::model::{LabelVector, PredictionSet, PredictionStatus};

/// Ledger reason for reports some panel member failed on.
pub const INCOMPLETE_PANEL: &str = "incomplete-panel";

/// What an exact tie means in an even-sized panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    Negative,
    Positive,
    RejectEven,
}

impl FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(TiePolicy::Negative),
            "positive" => Ok(TiePolicy::Positive),
            "reject_even" | "reject-even" => Ok(TiePolicy::RejectEven),
            other => Err(format!(
                "unknown tie policy {other:?} (negative, positive, reject_even)"
            )),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("majority vote needs at least two labelers, got {0}")]
    TooFewMembers(usize),
    #[error("tie on {label:?} for report {report_id:?} with the reject_even policy")]
    Tie { report_id: String, label: String },
    #[error("labeler {labeler:?} has no decision for {label:?} on report {report_id:?}")]
    LabelMismatch {
        labeler: String,
        report_id: String,
        label: String,
    },
}

/// `ensemble(a,b,c)` for members named a, b, c.
pub fn ensemble_name(preds: &[PredictionSet]) -> String {
    let names: Vec<&str> = preds.iter().map(|p| p.labeler_name.as_str()).collect();
    format!("ensemble({})", names.join(","))
}

fn vote(positive: usize, total: usize, policy: TiePolicy) -> Option<bool> {
    let negative = total - positive;
    if positive != negative {
        return Some(positive > negative);
    }
    match policy {
        TiePolicy::Negative => Some(false),
        TiePolicy::Positive => Some(true),
        TiePolicy::RejectEven => None,
    }
}

/// Combines labelers report by report. A report is voted on only when every
/// member produced a prediction for it; otherwise it goes to the ledger.
pub fn majority_vote(preds: &[PredictionSet], policy: TiePolicy) -> Result<PredictionSet, EnsembleError> {
    if preds.len() < 2 {
        return Err(EnsembleError::TooFewMembers(preds.len()));
    }
    let n = preds.len();
    let mut out = PredictionSet::new(ensemble_name(preds));
    let ids: BTreeSet<String> = preds.iter().flat_map(|p| p.report_ids()).collect();
    for id in ids {
        let vectors: Option<Vec<&LabelVector>> = preds.iter().map(|p| p.predictions.get(&id)).collect();
        let Some(vectors) = vectors else {
            out.insert_error(id, INCOMPLETE_PANEL).expect("ids are unique");
            continue;
        };
        let mut decisions = BTreeMap::new();
        for label in vectors[0].decisions.keys() {
            let mut positive = 0;
            for (member, v) in preds.iter().zip(&vectors) {
                match v.get(label) {
                    Some(true) => positive += 1,
                    Some(false) => {}
                    None => {
                        return Err(EnsembleError::LabelMismatch {
                            labeler: member.labeler_name.clone(),
                            report_id: id.clone(),
                            label: label.clone(),
                        })
                    }
                }
            }
            let bit = vote(positive, n, policy).ok_or_else(|| EnsembleError::Tie {
                report_id: id.clone(),
                label: label.clone(),
            })?;
            decisions.insert(label.clone(), bit);
        }
        let organs: BTreeSet<&String> = vectors.iter().flat_map(|v| v.uncertain.keys()).collect();
        let mut uncertain = BTreeMap::new();
        for organ in organs {
            let flagged = vectors.iter().filter(|v| v.is_uncertain(organ)).count();
            if 2 * flagged > n {
                uncertain.insert(organ.clone(), true);
            }
        }
        out.insert(id, LabelVector { decisions, uncertain }, PredictionStatus::Ok)
            .expect("ids are unique");
    }
    Ok(out)
}
