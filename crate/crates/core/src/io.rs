//! File formats shared by the command-line tools: prediction JSONL and
//! label-matrix CSV.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LabelSchema, LabelVector, PredictionSet, PredictionStatus};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("label file is missing column {0:?}")]
    MissingColumn(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionLine {
    report_id: String,
    labeler: String,
    #[serde(default)]
    decisions: BTreeMap<String, u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    uncertain: Vec<String>,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

/// Writes one compact JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// One JSON object per report: predictions first (id order), then ledger entries.
pub fn write_predictions<W: Write>(set: &PredictionSet, mut out: W) -> std::io::Result<()> {
    for (id, v) in &set.predictions {
        let line = PredictionLine {
            report_id: id.clone(),
            labeler: set.labeler_name.clone(),
            decisions: v.decisions.iter().map(|(l, &b)| (l.clone(), u8::from(b))).collect(),
            uncertain: v.uncertain.iter().filter(|(_, &u)| u).map(|(o, _)| o.clone()).collect(),
            status: set.status_of(id).as_str().to_string(),
            reason: None,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    for e in &set.errors {
        let line = PredictionLine {
            report_id: e.report_id.clone(),
            labeler: set.labeler_name.clone(),
            decisions: BTreeMap::new(),
            uncertain: Vec::new(),
            status: "error".into(),
            reason: Some(e.reason.clone()),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a predictions file. `default_name` names the set when the file is empty.
pub fn read_predictions<R: BufRead>(input: R, default_name: &str) -> Result<PredictionSet, FormatError> {
    let mut set = PredictionSet::new(default_name);
    let mut named = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| FormatError::Line { line: i + 1, message };
        let row: PredictionLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if !named {
            set.labeler_name = row.labeler.clone();
            named = true;
        } else if row.labeler != set.labeler_name {
            return Err(err(format!(
                "labeler {:?} differs from {:?} earlier in the file",
                row.labeler, set.labeler_name
            )));
        }
        let status = match row.status.as_str() {
            "error" => {
                set.insert_error(row.report_id, row.reason.unwrap_or_default())
                    .map_err(|e| err(e.to_string()))?;
                continue;
            }
            "ok" => PredictionStatus::Ok,
            "strict" => PredictionStatus::Strict,
            "salvaged" => PredictionStatus::Salvaged,
            other => return Err(err(format!("unknown status {other:?}"))),
        };
        let mut decisions = BTreeMap::new();
        for (label, value) in row.decisions {
            match value {
                0 | 1 => decisions.insert(label, value == 1),
                other => return Err(err(format!("decision for {label:?} is {other}, expected 0 or 1"))),
            };
        }
        let uncertain = row.uncertain.into_iter().map(|o| (o, true)).collect();
        set.insert(row.report_id, LabelVector { decisions, uncertain }, status)
            .map_err(|e| err(e.to_string()))?;
    }
    Ok(set)
}

/// `report_id` plus one 0/1 column per label, rows in id order.
pub fn write_label_csv<W: Write>(
    rows: &BTreeMap<String, LabelVector>,
    labels: &[String],
    out: W,
) -> Result<(), FormatError> {
    let csv_err = |e: csv::Error| FormatError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["report_id".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (id, v) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(
            labels
                .iter()
                .map(|l| if v.is_positive(l) { "1" } else { "0" }.to_string()),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a label matrix; every schema label must have a column. Extra
/// columns are ignored. Cells accept 0/1 and true/false.
pub fn read_label_csv<R: Read>(input: R, schema: &LabelSchema) -> Result<BTreeMap<String, LabelVector>, FormatError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| FormatError::Csv(e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| FormatError::MissingColumn(name.to_string()))
    };
    let id_col = col("report_id")?;
    let label_cols: Vec<(String, usize)> = schema
        .labels()
        .iter()
        .map(|l| Ok((l.clone(), col(l)?)))
        .collect::<Result<_, FormatError>>()?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| FormatError::Line {
            line,
            message: e.to_string(),
        })?;
        let mut decisions = BTreeMap::new();
        for (label, c) in &label_cols {
            let value = match rec.get(*c).map(str::trim) {
                Some("1") | Some("true") | Some("True") => true,
                Some("0") | Some("false") | Some("False") => false,
                other => {
                    return Err(FormatError::Line {
                        line,
                        message: format!("{label:?} cell {other:?} is not 0/1"),
                    })
                }
            };
            decisions.insert(label.clone(), value);
        }
        let id = rec.get(id_col).unwrap_or_default().trim().to_string();
        if out
            .insert(
                id.clone(),
                LabelVector {
                    decisions,
                    uncertain: BTreeMap::new(),
                },
            )
            .is_some()
        {
            return Err(FormatError::Line {
                line,
                message: format!("duplicate report {id:?}"),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> PredictionSet {
        let schema = LabelSchema::canonical();
        let mut p = PredictionSet::new("llm-a");
        let mut v = LabelVector::zeros(&schema);
        v.set("Gallstones", true);
        p.insert("r1", v.clone(), PredictionStatus::Strict).unwrap();
        let mut u = LabelVector::zeros(&schema);
        u.uncertain.insert("Lungs/Pleura".into(), true);
        p.insert("r2", u, PredictionStatus::Salvaged).unwrap();
        p.insert_error("r3", "missing:Gallstones").unwrap();
        p
    }

    #[test]
    fn predictions_round_trip() {
        let p = sample_set();
        let mut buf = Vec::new();
        write_predictions(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("\"status\":\"error\""));
        let back = read_predictions(buf.as_slice(), "x").unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn bad_decision_value_reports_line() {
        let text = "{\"report_id\":\"a\",\"labeler\":\"l\",\"decisions\":{\"X\":2},\"status\":\"ok\"}\n";
        let err = read_predictions(text.as_bytes(), "x").unwrap_err();
        assert!(err.to_string().starts_with("line 1"));
    }

    #[test]
    fn label_csv_round_trip() {
        let schema = LabelSchema::canonical();
        let p = sample_set();
        let mut buf = Vec::new();
        write_label_csv(&p.predictions, schema.labels(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 16);
        let back = read_label_csv(buf.as_slice(), &schema).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back["r1"].is_positive("Gallstones"));
        assert_eq!(back["r1"].decisions, p.predictions["r1"].decisions);
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_label_csv("report_id,Gallstones\nr,1\n".as_bytes(), &LabelSchema::canonical()).unwrap_err();
        assert!(matches!(err, FormatError::MissingColumn(ref c) if c == "Kidney Stone"));
    }
}
