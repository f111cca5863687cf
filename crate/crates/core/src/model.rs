//! Label schema and the value types shared across the pipeline.
//!
//! Everything here is an immutable value object once built. The schema is
//! the single source of label names and their canonical order; every file
//! format in the crate writes labels in [`LabelSchema::labels`] order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_SCHEMA_JSON: &str = include_str!("../resources/schema.json");

/// Number of disease labels tracked per organ system.
pub const DISEASES_PER_ORGAN: usize = 4;
/// Number of organ systems in a schema.
pub const ORGAN_COUNT: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema file is not valid JSON: {0}")]
    Json(String),
    #[error("schema must list exactly {ORGAN_COUNT} organ systems, found {0}")]
    OrganCount(usize),
    #[error("organ system {organ:?} must have exactly {DISEASES_PER_ORGAN} disease labels, found {found}")]
    DiseaseCount { organ: String, found: usize },
    #[error("duplicate label or organ name {0:?}")]
    Duplicate(String),
    #[error("empty name in schema")]
    EmptyName,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganSystem {
    pub name: String,
    pub disease_labels: Vec<String>,
    pub normal_label: String,
}

impl OrganSystem {
    /// Disease labels followed by the normal label.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.disease_labels
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.normal_label.as_str()))
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct SchemaFile {
    organ_systems: Vec<OrganSystem>,
}

/// Ordered organ systems with four disease labels and one normal label each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    organs: Vec<OrganSystem>,
    labels: Vec<String>,
}

impl LabelSchema {
    /// The embedded 15-label schema.
    pub fn canonical() -> Self {
        Self::from_json(DEFAULT_SCHEMA_JSON).expect("embedded schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        Self::new(file.organ_systems)
    }

    pub fn new(organs: Vec<OrganSystem>) -> Result<Self, SchemaError> {
        if organs.len() != ORGAN_COUNT {
            return Err(SchemaError::OrganCount(organs.len()));
        }
        let mut seen = BTreeSet::new();
        let mut labels = Vec::with_capacity(ORGAN_COUNT * (DISEASES_PER_ORGAN + 1));
        for organ in &organs {
            if organ.disease_labels.len() != DISEASES_PER_ORGAN {
                return Err(SchemaError::DiseaseCount {
                    organ: organ.name.clone(),
                    found: organ.disease_labels.len(),
                });
            }
            if !seen.insert(organ.name.clone()) {
                return Err(SchemaError::Duplicate(organ.name.clone()));
            }
            for label in organ.labels() {
                if label.trim().is_empty() {
                    return Err(SchemaError::EmptyName);
                }
                if !seen.insert(label.to_string()) {
                    return Err(SchemaError::Duplicate(label.to_string()));
                }
                labels.push(label.to_string());
            }
        }
        Ok(Self { organs, labels })
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            organ_systems: self.organs.clone(),
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn organs(&self) -> &[OrganSystem] {
        &self.organs
    }

    /// All labels in canonical order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn organ(&self, name: &str) -> Option<&OrganSystem> {
        self.organs.iter().find(|o| o.name == name)
    }

    /// The organ system owning `label`.
    pub fn organ_of(&self, label: &str) -> Option<&OrganSystem> {
        self.organs.iter().find(|o| o.labels().any(|l| l == label))
    }

    pub fn is_disease(&self, label: &str) -> bool {
        self.organs.iter().any(|o| o.disease_labels.iter().any(|l| l == label))
    }

    pub fn is_normal(&self, label: &str) -> bool {
        self.organs.iter().any(|o| o.normal_label == label)
    }

    /// Returns `keep` in schema order, rejecting names the schema does not know.
    pub fn resolve_subset<S: AsRef<str>>(&self, keep: &[S]) -> Result<Vec<String>, SchemaError> {
        for k in keep {
            if !self.contains(k.as_ref()) {
                return Err(SchemaError::UnknownLabel(k.as_ref().to_string()));
            }
        }
        Ok(self
            .labels
            .iter()
            .filter(|l| keep.iter().any(|k| k.as_ref() == l.as_str()))
            .cloned()
            .collect())
    }
}

/// Binary decisions per label plus per-organ uncertainty flags.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelVector {
    pub decisions: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    /// Only raised flags are stored; a missing organ is not uncertain.
    pub uncertain: BTreeMap<String, bool>,
}

impl LabelVector {
    /// All labels of `schema` set to 0, no organ flagged.
    pub fn zeros(schema: &LabelSchema) -> Self {
        Self {
            decisions: schema.labels().iter().map(|l| (l.clone(), false)).collect(),
            uncertain: BTreeMap::new(),
        }
    }

    pub fn from_decisions<I, S>(decisions: I) -> Self
    where
        I: IntoIterator<Item = (S, bool)>,
        S: Into<String>,
    {
        Self {
            decisions: decisions.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            uncertain: BTreeMap::new(),
        }
    }

    pub fn get(&self, label: &str) -> Option<bool> {
        self.decisions.get(label).copied()
    }

    pub fn is_positive(&self, label: &str) -> bool {
        self.get(label).unwrap_or(false)
    }

    pub fn set(&mut self, label: &str, value: bool) {
        self.decisions.insert(label.to_string(), value);
    }

    pub fn is_uncertain(&self, organ: &str) -> bool {
        self.uncertain.get(organ).copied().unwrap_or(false)
    }

    /// Restricts the vector to `keep`; organ flags survive only for organs
    /// that still own at least one kept label.
    pub fn project(&self, keep: &[String], schema: &LabelSchema) -> Self {
        let decisions = self
            .decisions
            .iter()
            .filter(|(k, _)| keep.contains(k))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let uncertain = self
            .uncertain
            .iter()
            .filter(|(organ, _)| {
                schema
                    .organ(organ)
                    .map(|o| o.labels().any(|l| keep.iter().any(|k| k == l)))
                    .unwrap_or(false)
            })
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        Self { decisions, uncertain }
    }
}

/// A single way a [`LabelVector`] can break the schema's rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingLabel(String),
    UnknownLabel(String),
    UnknownOrgan(String),
    UncertainWithPositive {
        organ: String,
        label: String,
    },
    NormalDiseaseConflict {
        organ: String,
        normal: String,
        diseases: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingLabel(l) => write!(f, "coverage: missing label {l:?}"),
            Violation::UnknownLabel(l) => write!(f, "coverage: unknown label {l:?}"),
            Violation::UnknownOrgan(o) => write!(f, "unknown organ system {o:?} in uncertainty flags"),
            Violation::UncertainWithPositive { organ, label } => {
                write!(f, "{organ} is flagged uncertain but {label:?} is 1")
            }
            Violation::NormalDiseaseConflict {
                organ,
                normal,
                diseases,
            } => write!(
                f,
                "{organ}: normal/disease conflict, {normal:?}=1 together with {}",
                diseases.join(", ")
            ),
        }
    }
}

/// Lists every invariant the vector breaks against `schema`; empty means valid.
pub fn validate_label_vector(v: &LabelVector, schema: &LabelSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    for label in schema.labels() {
        if !v.decisions.contains_key(label) {
            out.push(Violation::MissingLabel(label.clone()));
        }
    }
    for label in v.decisions.keys() {
        if !schema.contains(label) {
            out.push(Violation::UnknownLabel(label.clone()));
        }
    }
    for (organ, &flag) in &v.uncertain {
        match schema.organ(organ) {
            None => out.push(Violation::UnknownOrgan(organ.clone())),
            Some(system) if flag => {
                for label in system.labels() {
                    if v.is_positive(label) {
                        out.push(Violation::UncertainWithPositive {
                            organ: organ.clone(),
                            label: label.to_string(),
                        });
                    }
                }
            }
            Some(_) => {}
        }
    }
    for organ in schema.organs() {
        if v.is_positive(&organ.normal_label) {
            let diseases: Vec<String> = organ
                .disease_labels
                .iter()
                .filter(|d| v.is_positive(d))
                .cloned()
                .collect();
            if !diseases.is_empty() {
                out.push(Violation::NormalDiseaseConflict {
                    organ: organ.name.clone(),
                    normal: organ.normal_label.clone(),
                    diseases,
                });
            }
        }
    }
    out
}

/// One radiology report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report_id: String,
    pub patient_id: String,
    #[serde(rename = "text")]
    pub raw_text: String,
    /// Findings section; `None` before sectioning or when no Findings header exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findings: Option<String>,
}

impl ReportRecord {
    pub fn new(report_id: impl Into<String>, patient_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            report_id: report_id.into(),
            patient_id: patient_id.into(),
            raw_text: raw_text.into(),
            findings: None,
        }
    }

    pub fn with_findings(mut self, findings: impl Into<String>) -> Self {
        self.findings = Some(findings.into());
        self
    }
}

/// How a prediction was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    /// Produced directly (rule-based labeler, ensemble).
    #[default]
    Ok,
    /// Model output parsed as strict JSON.
    Strict,
    /// Model output recovered by the salvage scanner.
    Salvaged,
}

impl PredictionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionStatus::Ok => "ok",
            PredictionStatus::Strict => "strict",
            PredictionStatus::Salvaged => "salvaged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub report_id: String,
    pub reason: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredictionSetError {
    #[error("report {0:?} appears more than once")]
    Duplicate(String),
}

/// One labeler's output over a corpus: predictions plus the reports it gave up on.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionSet {
    pub labeler_name: String,
    pub predictions: BTreeMap<String, LabelVector>,
    pub errors: Vec<LedgerEntry>,
    /// Per-report provenance; absent entries mean [`PredictionStatus::Ok`].
    pub status: BTreeMap<String, PredictionStatus>,
}

impl PredictionSet {
    pub fn new(labeler_name: impl Into<String>) -> Self {
        Self {
            labeler_name: labeler_name.into(),
            ..Default::default()
        }
    }

    pub fn insert(
        &mut self,
        report_id: impl Into<String>,
        vector: LabelVector,
        status: PredictionStatus,
    ) -> Result<(), PredictionSetError> {
        let id = report_id.into();
        if self.contains(&id) {
            return Err(PredictionSetError::Duplicate(id));
        }
        if status != PredictionStatus::Ok {
            self.status.insert(id.clone(), status);
        }
        self.predictions.insert(id, vector);
        Ok(())
    }

    pub fn insert_error(
        &mut self,
        report_id: impl Into<String>,
        reason: impl Into<String>,
    ) -> Result<(), PredictionSetError> {
        let id = report_id.into();
        if self.contains(&id) {
            return Err(PredictionSetError::Duplicate(id));
        }
        self.errors.push(LedgerEntry {
            report_id: id,
            reason: reason.into(),
        });
        Ok(())
    }

    pub fn contains(&self, report_id: &str) -> bool {
        self.predictions.contains_key(report_id) || self.is_error(report_id)
    }

    pub fn is_error(&self, report_id: &str) -> bool {
        self.errors.iter().any(|e| e.report_id == report_id)
    }

    pub fn status_of(&self, report_id: &str) -> PredictionStatus {
        self.status.get(report_id).copied().unwrap_or_default()
    }

    /// Number of reports submitted to the labeler.
    pub fn len(&self) -> usize {
        self.predictions.len() + self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every report id, predicted or errored, sorted.
    pub fn report_ids(&self) -> BTreeSet<String> {
        self.predictions
            .keys()
            .cloned()
            .chain(self.errors.iter().map(|e| e.report_id.clone()))
            .collect()
    }

    /// Number of predictions that break normal/disease exclusivity.
    pub fn exclusivity_conflicts(&self, schema: &LabelSchema) -> usize {
        self.predictions
            .values()
            .filter(|v| {
                validate_label_vector(v, schema)
                    .iter()
                    .any(|x| matches!(x, Violation::NormalDiseaseConflict { .. }))
            })
            .count()
    }
}

/// Keeps only the named labels in every prediction. Errors are preserved.
pub fn project_labels<S: AsRef<str>>(
    pred: &PredictionSet,
    keep: &[S],
    schema: &LabelSchema,
) -> Result<PredictionSet, SchemaError> {
    let keep = schema.resolve_subset(keep)?;
    Ok(PredictionSet {
        labeler_name: pred.labeler_name.clone(),
        predictions: pred
            .predictions
            .iter()
            .map(|(id, v)| (id.clone(), v.project(&keep, schema)))
            .collect(),
        errors: pred.errors.clone(),
        status: pred.status.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    Negative,
    Positive,
    /// The finding is in the text but not clinically actionable.
    SubjectiveMention,
}

/// One annotator's decision on one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriStateAnnotation {
    pub report_id: String,
    pub annotator_id: String,
    pub labels: BTreeMap<String, TriState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_notes: BTreeMap<String, String>,
    /// Ordering key assigned by the annotation store.
    #[serde(default)]
    pub timestamp: u64,
}

impl TriStateAnnotation {
    /// Schema labels this annotation does not cover.
    pub fn missing_labels(&self, schema: &LabelSchema) -> Vec<String> {
        schema
            .labels()
            .iter()
            .filter(|l| !self.labels.contains_key(*l))
            .cloned()
            .collect()
    }

    pub fn unknown_labels(&self, schema: &LabelSchema) -> Vec<String> {
        self.labels.keys().filter(|l| !schema.contains(l)).cloned().collect()
    }
}
