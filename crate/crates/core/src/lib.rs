//! Multi-label annotation of CT report Findings text.
//!
//! The pipeline: load and section reports ([`ingest`]), label them with the
//! rule-based annotator ([`rba`]) or a chat-completion model ([`llm`]),
//! combine labelers by majority vote ([`ensemble`]), pick reports for manual
//! review ([`sampling`]), collect tri-state human annotations
//! ([`annotate`]), and measure agreement and accuracy ([`metrics`]).

pub mod annotate;
pub mod ensemble;
pub mod ingest;
pub mod io;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod rba;
pub mod sampling;

pub use model::{
    project_labels, validate_label_vector, LabelSchema, LabelVector, LedgerEntry, OrganSystem, PredictionSet,
    PredictionStatus, ReportRecord, TriState, TriStateAnnotation, Violation,
};
