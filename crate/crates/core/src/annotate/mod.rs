//! Manual annotation: the durable log, the two binary reference views, and
//! the HTTP service that feeds reports to annotators.

mod server;
mod store;
mod views;

pub use server::{router, serve, AppState, ANNOTATOR_HEADER, DEFAULT_PORT};
pub use store::{AnnotationSession, AnnotationStore, ReportState, StoreError};
pub use views::{
    binarize, derive_view, export_reference, latest_annotations, subjectivity_report, write_subjectivity_csv,
    ReferenceView, SubjectivityRow, ViewKind,
};
