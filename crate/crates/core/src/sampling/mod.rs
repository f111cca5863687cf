//! Train/test splitting and manual-review sample selection.

mod combination;
mod split;

use thiserror::Error;

pub use combination::{
    category_letter, category_prevalence, combination_assign, combination_index, combination_pattern, covered_reports,
    random_supplement, sample_disagreement_set, CategoryDraw, CategoryPrevalence, CategoryRow, DisagreementSample,
};
pub use split::{stratified_patient_split, LabelDeviation, Side, SplitAssignment, SplitItem};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SamplingError {
    #[error("train fraction must be strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error("report {0:?} appears more than once")]
    DuplicateReport(String),
    #[error("report {0:?} has no label vector")]
    MissingVector(String),
    #[error("panel must have between 1 and 16 labelers, got {0}")]
    PanelSize(usize),
    #[error("labeler {labeler:?} has no decision for {label:?}")]
    MissingLabel { labeler: String, label: String },
    #[error("requested {requested} reports but only {available} are available")]
    NotEnough { requested: usize, available: usize },
    #[error("category table: {0}")]
    Table(String),
}
