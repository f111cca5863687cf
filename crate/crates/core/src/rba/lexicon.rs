use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::text::Term;
use crate::model::LabelSchema;

const DEFAULT_LEXICON_JSON: &str = include_str!("../../resources/lexicon.json");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {message}")]
    Io { path: String, message: String },
    #[error("lexicon is not valid JSON: {0}")]
    Json(String),
    #[error("lexicon references unknown label {0:?}")]
    UnknownLabel(String),
    #[error("lexicon references unknown organ system {0:?}")]
    UnknownOrgan(String),
    #[error("{0:?} is a normal label; list its terms under the organ's normal_terms")]
    NotADisease(String),
    #[error("disease label {0:?} has no descriptors and could never fire")]
    NoDescriptors(String),
    #[error("organ system {organ:?} needs at least one {what}")]
    MissingOrganTerms { organ: String, what: &'static str },
    #[error("suppressor_window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    #[serde(default)]
    negation_terms: Vec<String>,
    #[serde(default)]
    qualifier_terms: Vec<String>,
    #[serde(default = "default_window")]
    suppressor_window: usize,
    organs: BTreeMap<String, OrganEntry>,
    labels: BTreeMap<String, LabelEntry>,
}

fn default_window() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrganEntry {
    #[serde(default)]
    anchors: Vec<String>,
    #[serde(default)]
    normal_terms: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelEntry {
    #[serde(default)]
    single_organ: Vec<String>,
    #[serde(default)]
    multi_organ: Vec<String>,
    #[serde(default)]
    suppressors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OrganTerms {
    pub organ: String,
    pub normal_label: String,
    pub anchors: Vec<Term>,
    pub normal_terms: Vec<Term>,
}

#[derive(Debug, Clone)]
pub struct LabelTerms {
    pub label: String,
    pub organ: String,
    pub single_organ: Vec<Term>,
    pub multi_organ: Vec<Term>,
    pub suppressors: Vec<Term>,
}

/// The annotator's term inventory, validated against a schema.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub organs: Vec<OrganTerms>,
    pub labels: Vec<LabelTerms>,
    pub negations: Vec<Term>,
    pub qualifiers: Vec<Term>,
    pub suppressor_window: usize,
}

fn terms(list: &[String]) -> Vec<Term> {
    let mut out: Vec<Term> = list.iter().map(|t| Term::new(t)).filter(|t| !t.is_empty()).collect();
    // longest first so that a containing phrase claims its tokens before its parts
    out.sort_by_key(|t| std::cmp::Reverse(t.len()));
    out
}

impl Lexicon {
    /// The embedded default lexicon.
    pub fn embedded(schema: &LabelSchema) -> Result<Self, LexiconError> {
        Self::from_json(DEFAULT_LEXICON_JSON, schema)
    }

    pub fn from_json(text: &str, schema: &LabelSchema) -> Result<Self, LexiconError> {
        let file: LexiconFile = serde_json::from_str(text).map_err(|e| LexiconError::Json(e.to_string()))?;
        if file.suppressor_window == 0 {
            return Err(LexiconError::ZeroWindow);
        }
        for name in file.organs.keys() {
            if schema.organ(name).is_none() {
                return Err(LexiconError::UnknownOrgan(name.clone()));
            }
        }
        for name in file.labels.keys() {
            if !schema.contains(name) {
                return Err(LexiconError::UnknownLabel(name.clone()));
            }
            if schema.is_normal(name) {
                return Err(LexiconError::NotADisease(name.clone()));
            }
        }

        let mut organs = Vec::new();
        let mut labels = Vec::new();
        for system in schema.organs() {
            let entry = file.organs.get(&system.name);
            let anchors = entry.map(|e| terms(&e.anchors)).unwrap_or_default();
            let normal_terms = entry.map(|e| terms(&e.normal_terms)).unwrap_or_default();
            if anchors.is_empty() {
                return Err(LexiconError::MissingOrganTerms {
                    organ: system.name.clone(),
                    what: "anchor",
                });
            }
            if normal_terms.is_empty() {
                return Err(LexiconError::MissingOrganTerms {
                    organ: system.name.clone(),
                    what: "normal term",
                });
            }
            organs.push(OrganTerms {
                organ: system.name.clone(),
                normal_label: system.normal_label.clone(),
                anchors,
                normal_terms,
            });
            for disease in &system.disease_labels {
                let entry = file.labels.get(disease);
                let single_organ = entry.map(|e| terms(&e.single_organ)).unwrap_or_default();
                let multi_organ = entry.map(|e| terms(&e.multi_organ)).unwrap_or_default();
                if single_organ.is_empty() && multi_organ.is_empty() {
                    return Err(LexiconError::NoDescriptors(disease.clone()));
                }
                labels.push(LabelTerms {
                    label: disease.clone(),
                    organ: system.name.clone(),
                    single_organ,
                    multi_organ,
                    suppressors: entry.map(|e| terms(&e.suppressors)).unwrap_or_default(),
                });
            }
        }
        Ok(Self {
            organs,
            labels,
            negations: terms(&file.negation_terms),
            qualifiers: terms(&file.qualifier_terms),
            suppressor_window: file.suppressor_window,
        })
    }

    pub fn organ(&self, name: &str) -> Option<&OrganTerms> {
        self.organs.iter().find(|o| o.organ == name)
    }

    /// Disease labels with at least one descriptor; always every disease label of the schema.
    pub fn covered_labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.label.as_str())
    }
}

/// Loads and validates a lexicon file.
pub fn load_lexicon(path: &Path, schema: &LabelSchema) -> Result<Lexicon, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|e| LexiconError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Lexicon::from_json(&text, schema)
}
