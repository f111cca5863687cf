//! Corpus loading, Findings extraction, sentence segmentation and TF-IDF term suggestion.

mod sections;
mod sentences;
mod tfidf;

pub use sections::{extract_findings, SectionConfig};
pub use sentences::{segment_sentences, SegmentConfig, Sentence};
pub use tfidf::{tfidf_scores, tfidf_suggest_terms, TermScore, TfidfOptions};

pub use crate::rba::load_lexicon;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::model::ReportRecord;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("duplicate report_id {0:?}")]
    DuplicateId(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("invalid mapping config: {0}")]
    Mapping(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(ReportFormat::Jsonl),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (expected jsonl or csv)")),
        }
    }
}

/// Reports with unique ids, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    records: Vec<ReportRecord>,
    pub source: String,
}

impl Corpus {
    pub fn new(records: Vec<ReportRecord>, source: impl Into<String>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.report_id.as_str()) {
                return Err(IngestError::DuplicateId(r.report_id.clone()));
            }
        }
        Ok(Self {
            records,
            source: source.into(),
        })
    }

    pub fn records(&self) -> &[ReportRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ReportRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, report_id: &str) -> Option<&ReportRecord> {
        self.records.iter().find(|r| r.report_id == report_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.report_id.as_str())
    }

    /// Runs [`extract_findings`] on every record that has no findings yet.
    pub fn sectioned(self, config: &SectionConfig) -> Self {
        let source = self.source;
        let records = self
            .records
            .into_iter()
            .map(|r| {
                if r.findings.is_some() {
                    r
                } else {
                    extract_findings(r, config)
                }
            })
            .collect();
        Self { records, source }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A row that could not be turned into a [`ReportRecord`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub row_errors: Vec<RowError>,
    pub warnings: Vec<String>,
}

/// Source-column to canonical-field renames, e.g. `{"AccessionNo": "report_id"}`.
///
/// Targets that are not one of the four record fields are treated as label
/// renames and applied when reading label tables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnMapping {
    renames: BTreeMap<String, String>,
}

pub const RECORD_FIELDS: [&str; 4] = ["report_id", "patient_id", "text", "findings"];

impl ColumnMapping {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let renames: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| IngestError::Mapping(e.to_string()))?;
        let mut targets = HashSet::new();
        for target in renames.values() {
            if !targets.insert(target.as_str()) {
                return Err(IngestError::Mapping(format!("two source columns map to {target:?}")));
            }
        }
        Ok(Self { renames })
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::from_json(&read(path)?)
    }

    pub fn rename<'a>(&'a self, column: &'a str) -> &'a str {
        self.renames.get(column).map(String::as_str).unwrap_or(column)
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a report file.
///
/// Rows missing a required field are skipped and reported in
/// [`LoadedCorpus::row_errors`]; a repeated `report_id` fails the whole load.
/// When `text` is absent but `findings` is present, the findings double as text.
pub fn load_reports(
    path: &Path,
    format: ReportFormat,
    mapping: Option<&ColumnMapping>,
) -> Result<LoadedCorpus, IngestError> {
    let content = read(path)?;
    parse_reports(&content, format, mapping, &path.display().to_string())
}

pub fn parse_reports(
    content: &str,
    format: ReportFormat,
    mapping: Option<&ColumnMapping>,
    source: &str,
) -> Result<LoadedCorpus, IngestError> {
    let default_mapping = ColumnMapping::default();
    let mapping = mapping.unwrap_or(&default_mapping);
    let rows = match format {
        ReportFormat::Jsonl => jsonl_rows(content, mapping),
        ReportFormat::Csv => csv_rows(content, mapping)?,
    };

    let mut loaded = LoadedCorpus::default();
    let mut records = Vec::new();
    for (line, row) in rows {
        match row.and_then(record_from_fields) {
            Ok(r) => records.push(r),
            Err(message) => loaded.row_errors.push(RowError { line, message }),
        }
    }
    if records.is_empty() && loaded.row_errors.is_empty() {
        let msg = format!("{source}: no reports found");
        log::warn!("{msg}");
        loaded.warnings.push(msg);
    }
    for e in &loaded.row_errors {
        log::warn!("{source}: {e}");
    }
    loaded.corpus = Corpus::new(records, source)?;
    Ok(loaded)
}

type Row = (usize, Result<BTreeMap<String, String>, String>);

fn jsonl_rows(content: &str, mapping: &ColumnMapping) -> Vec<Row> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let row = match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(obj)) => Ok(obj
                    .into_iter()
                    .filter_map(|(k, v)| {
                        let value = match v {
                            Value::String(s) => s,
                            Value::Number(n) => n.to_string(),
                            Value::Null => return None,
                            other => other.to_string(),
                        };
                        Some((mapping.rename(&k).to_string(), value))
                    })
                    .collect()),
                Ok(_) => Err("row is not a JSON object".to_string()),
                Err(e) => Err(format!("invalid JSON: {e}")),
            };
            (i + 1, row)
        })
        .collect()
}

fn csv_rows(content: &str, mapping: &ColumnMapping) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(content.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .iter()
        .map(|h| mapping.rename(h.trim()).to_string())
        .collect();
    let mut rows = Vec::new();
    for result in reader.records() {
        match result {
            Ok(rec) => {
                let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                let fields = headers
                    .iter()
                    .zip(rec.iter())
                    .filter(|(_, v)| !v.is_empty())
                    .map(|(h, v)| (h.clone(), v.to_string()))
                    .collect();
                rows.push((line, Ok(fields)));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                rows.push((line, Err(e.to_string())));
            }
        }
    }
    Ok(rows)
}

fn record_from_fields(mut fields: BTreeMap<String, String>) -> Result<ReportRecord, String> {
    let findings = fields.remove("findings");
    let text = fields.remove("text").or_else(|| findings.clone());
    let mut missing = Vec::new();
    let report_id = fields.remove("report_id").filter(|s| !s.trim().is_empty());
    let patient_id = fields.remove("patient_id").filter(|s| !s.trim().is_empty());
    if report_id.is_none() {
        missing.push("report_id");
    }
    if patient_id.is_none() {
        missing.push("patient_id");
    }
    if text.is_none() {
        missing.push("text");
    }
    if !missing.is_empty() {
        return Err(format!("missing field(s): {}", missing.join(", ")));
    }
    let text = text.unwrap_or_default();
    if let Some(f) = &findings {
        if !text.contains(f.as_str()) {
            return Err("findings is not a substring of text".to_string());
        }
    }
    Ok(ReportRecord {
        report_id: report_id.unwrap_or_default(),
        patient_id: patient_id.unwrap_or_default(),
        raw_text: text,
        findings,
    })
}

/// Reads a corpus previously written with [`Corpus::write_jsonl`].
pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, IngestError> {
    load_reports(path, ReportFormat::Jsonl, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_line_jsonl_gives_three_records() {
        let text = r#"{"report_id":"R1","patient_id":"P1","text":"FINDINGS: Lungs are clear."}
{"report_id":"R2","patient_id":"P1","text":"FINDINGS: Liver normal."}
{"report_id":"R3","patient_id":"P2","text":"FINDINGS: Kidneys normal.","findings":"Kidneys normal."}
"#;
        let loaded = parse_reports(text, ReportFormat::Jsonl, None, "t").unwrap();
        assert_eq!(loaded.corpus.len(), 3);
        assert!(loaded.row_errors.is_empty());
        assert_eq!(
            loaded.corpus.get("R3").unwrap().findings.as_deref(),
            Some("Kidneys normal.")
        );
    }

    #[test]
    fn empty_file_warns() {
        let loaded = parse_reports("", ReportFormat::Jsonl, None, "empty.jsonl").unwrap();
        assert!(loaded.corpus.is_empty());
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn duplicate_id_fails_naming_it() {
        let text = "{\"report_id\":\"R1\",\"patient_id\":\"P1\",\"text\":\"a\"}\n\
                    {\"report_id\":\"R1\",\"patient_id\":\"P2\",\"text\":\"b\"}\n";
        let err = parse_reports(text, ReportFormat::Jsonl, None, "t").unwrap_err();
        assert!(matches!(&err, IngestError::DuplicateId(id) if id == "R1"));
        assert!(err.to_string().contains("R1"));
    }

    #[test]
    fn missing_field_is_a_row_error_with_line_number() {
        let text = "{\"report_id\":\"R1\",\"patient_id\":\"P1\",\"text\":\"a\"}\n\
                    {\"report_id\":\"R2\",\"text\":\"b\"}\n";
        let loaded = parse_reports(text, ReportFormat::Jsonl, None, "t").unwrap();
        assert_eq!(loaded.corpus.len(), 1);
        assert_eq!(loaded.row_errors.len(), 1);
        assert_eq!(loaded.row_errors[0].line, 2);
        assert!(loaded.row_errors[0].message.contains("patient_id"));
    }

    #[test]
    fn csv_with_quoted_multiline_text() {
        let text = "report_id,patient_id,text\n\
                    R1,P1,\"FINDINGS:\nLungs are clear, no effusion.\"\n\
                    R2,P2,plain\n\
                    R3,,missing patient\n";
        let loaded = parse_reports(text, ReportFormat::Csv, None, "t").unwrap();
        assert_eq!(loaded.corpus.len(), 2);
        assert_eq!(
            loaded.corpus.get("R1").unwrap().raw_text,
            "FINDINGS:\nLungs are clear, no effusion."
        );
        assert_eq!(loaded.row_errors.len(), 1);
        assert_eq!(loaded.row_errors[0].line, 5);
    }

    #[test]
    fn mapping_renames_columns() {
        let mapping =
            ColumnMapping::from_json(r#"{"VolumeName":"report_id","Patient":"patient_id","Findings_EN":"findings"}"#)
                .unwrap();
        let text = "VolumeName,Patient,Findings_EN\nv1,p1,Minimal atelectasis.\n";
        let loaded = parse_reports(text, ReportFormat::Csv, Some(&mapping), "t").unwrap();
        let r = loaded.corpus.get("v1").unwrap();
        assert_eq!(r.raw_text, "Minimal atelectasis.");
        assert_eq!(r.findings.as_deref(), Some("Minimal atelectasis."));
    }

    #[test]
    fn mapping_rejects_colliding_targets() {
        assert!(ColumnMapping::from_json(r#"{"a":"text","b":"text"}"#).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus = Corpus::new(
            vec![
                ReportRecord::new("R1", "P1", "FINDINGS: x. IMPRESSION: y.").with_findings("x."),
                ReportRecord::new("R2", "P2", "no header"),
            ],
            "mem",
        )
        .unwrap();
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        let back = parse_reports(std::str::from_utf8(&buf).unwrap(), ReportFormat::Jsonl, None, "mem").unwrap();
        assert_eq!(back.corpus.records(), corpus.records());
    }
}
