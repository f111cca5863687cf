//! Turning model completions into label vectors.
//!
//! Strict parsing accepts exactly one JSON object shaped like the answer
//! template. Anything else goes to the salvage scanner, which looks for every
//! label name followed by a separator and a boolean-like token.

use std::collections::BTreeMap;
use std::fmt;

use regex::Regex;
use serde_json::{Map, Value};

use crate::model::{LabelSchema, LabelVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrictError(pub String);

impl fmt::Display for StrictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "strict parse failed: {}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SalvageError {
    Missing(Vec<String>),
    Conflict(String),
}

impl fmt::Display for SalvageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SalvageError::Missing(labels) => write!(f, "missing:{}", labels.join(",")),
            SalvageError::Conflict(label) => write!(f, "conflict:{label}"),
        }
    }
}

/// Compiled parsers for one schema.
#[derive(Debug, Clone)]
pub struct CompletionParser {
    schema: LabelSchema,
    label_patterns: Vec<(String, Regex)>,
    id_pattern: Regex,
}

impl CompletionParser {
    pub fn new(schema: &LabelSchema) -> Self {
        let label_patterns = schema
            .labels()
            .iter()
            .map(|label| {
                let re = Regex::new(&format!(
                    r#"(?:^|[^A-Za-z0-9_])['"]?{}['"]?\s*[:=]\s*['"]?(True|true|False|false|1|0)"#,
                    regex::escape(label)
                ))
                .expect("label pattern compiles");
                (label.clone(), re)
            })
            .collect();
        Self {
            schema: schema.clone(),
            label_patterns,
            id_pattern: Regex::new(r#"['"]?\bID['"]?\s*:\s*['"]?([A-Za-z0-9_.\-]+)"#).expect("id pattern compiles"),
        }
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    /// Parses a completion that is exactly one template-shaped JSON object.
    /// Returns the vector and the echoed pseudo-ID.
    pub fn strict(&self, raw: &str) -> Result<(LabelVector, String), StrictError> {
        let err = |m: &str| StrictError(m.to_string());
        let value: Value = serde_json::from_str(raw.trim()).map_err(|e| StrictError(format!("not JSON: {e}")))?;
        let obj = value.as_object().ok_or_else(|| err("not a JSON object"))?;
        if let Some(extra) = obj.keys().find(|k| *k != "ID" && *k != "Decisions") {
            return Err(StrictError(format!("unexpected key {extra:?}")));
        }
        let id = match obj.get("ID") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => return Err(err("ID is not a string or number")),
            None => return Err(err("missing ID")),
        };
        let decisions = obj
            .get("Decisions")
            .and_then(Value::as_object)
            .ok_or_else(|| err("missing Decisions object"))?;
        let mut out = BTreeMap::new();
        for label in self.schema.labels() {
            match decisions.get(label) {
                Some(Value::Bool(b)) => {
                    out.insert(label.clone(), *b);
                }
                Some(_) => return Err(StrictError(format!("{label:?} is not a boolean"))),
                None => return Err(StrictError(format!("missing label {label:?}"))),
            }
        }
        if let Some(extra) = decisions.keys().find(|k| !self.schema.contains(k)) {
            return Err(StrictError(format!("unexpected label {extra:?}")));
        }
        Ok((
            LabelVector {
                decisions: out,
                uncertain: BTreeMap::new(),
            },
            id,
        ))
    }

    /// Scans free text for `<Label><sep><bool>` pairs. Succeeds when every
    /// schema label is found with one unambiguous value; repeated mentions
    /// must agree.
    pub fn salvage(&self, raw: &str) -> Result<(LabelVector, Option<String>), SalvageError> {
        let mut decisions = BTreeMap::new();
        let mut missing = Vec::new();
        for (label, re) in &self.label_patterns {
            let mut value: Option<bool> = None;
            for caps in re.captures_iter(raw) {
                let whole = caps.get(0).expect("match");
                if !token_ends_cleanly(&raw[whole.end()..]) {
                    continue;
                }
                let v = matches!(&caps[1], "True" | "true" | "1");
                match value {
                    Some(prev) if prev != v => return Err(SalvageError::Conflict(label.clone())),
                    _ => value = Some(v),
                }
            }
            match value {
                Some(v) => {
                    decisions.insert(label.clone(), v);
                }
                None => missing.push(label.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(SalvageError::Missing(missing));
        }
        let id = self.id_pattern.captures(raw).map(|c| c[1].to_string());
        Ok((
            LabelVector {
                decisions,
                uncertain: BTreeMap::new(),
            },
            id,
        ))
    }
}

// Rejects `True/False` template echoes and tokens that run on into a word or number.
fn token_ends_cleanly(rest: &str) -> bool {
    let mut chars = rest.chars();
    match chars.next() {
        None => true,
        Some(c) if c.is_alphanumeric() || c == '_' || c == '/' => false,
        Some('.') => !chars.next().is_some_and(|c| c.is_ascii_digit()),
        Some(_) => true,
    }
}

pub fn parse_strict(raw: &str, schema: &LabelSchema) -> Result<(LabelVector, String), StrictError> {
    CompletionParser::new(schema).strict(raw)
}

pub fn parse_salvage(raw: &str, schema: &LabelSchema) -> Result<(LabelVector, Option<String>), SalvageError> {
    CompletionParser::new(schema).salvage(raw)
}

/// Renders a vector in the strict answer format.
pub fn serialize_completion(id: &str, v: &LabelVector, schema: &LabelSchema) -> String {
    let mut decisions = Map::new();
    for label in schema.labels() {
        decisions.insert(label.clone(), Value::Bool(v.is_positive(label)));
    }
    let mut obj = Map::new();
    obj.insert("ID".into(), Value::String(id.to_string()));
    obj.insert("Decisions".into(), Value::Object(decisions));
    Value::Object(obj).to_string()
}
