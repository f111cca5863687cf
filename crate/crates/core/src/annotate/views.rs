use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::io::{write_label_csv, FormatError};
use crate::metrics::fmt6;
use crate::model::{LabelSchema, LabelVector, TriState, TriStateAnnotation};

/// How a subjective mention is binarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    /// Subjective mentions count as negative.
    Actionable,
    /// Subjective mentions count as positive.
    Mention,
}

impl FromStr for ViewKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "actionable" => Ok(ViewKind::Actionable),
            "mention" => Ok(ViewKind::Mention),
            other => Err(format!("unknown view {other:?} (actionable, mention)")),
        }
    }
}

pub fn binarize(state: TriState, kind: ViewKind) -> bool {
    match state {
        TriState::Positive => true,
        TriState::Negative => false,
        TriState::SubjectiveMention => kind == ViewKind::Mention,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReferenceView {
    pub kind: ViewKind,
    pub rows: BTreeMap<String, LabelVector>,
}

/// The last annotation per report, optionally for one annotator only.
/// Log order decides; store timestamps increase along the log.
pub fn latest_annotations<'a>(
    log: &'a [TriStateAnnotation],
    annotator: Option<&str>,
) -> BTreeMap<&'a str, &'a TriStateAnnotation> {
    let mut out = BTreeMap::new();
    for a in log {
        if annotator.is_none_or(|who| a.annotator_id == who) {
            out.insert(a.report_id.as_str(), a);
        }
    }
    out
}

/// Binary reference labels from the annotation log.
pub fn derive_view(
    log: &[TriStateAnnotation],
    kind: ViewKind,
    schema: &LabelSchema,
    annotator: Option<&str>,
) -> ReferenceView {
    let rows = latest_annotations(log, annotator)
        .into_iter()
        .map(|(id, a)| {
            let decisions = schema
                .labels()
                .iter()
                .map(|l| (l.clone(), a.labels.get(l).is_some_and(|s| binarize(*s, kind))))
                .collect();
            (
                id.to_string(),
                LabelVector {
                    decisions,
                    uncertain: BTreeMap::new(),
                },
            )
        })
        .collect();
    ReferenceView { kind, rows }
}

pub fn export_reference<W: Write>(view: &ReferenceView, schema: &LabelSchema, out: W) -> Result<(), FormatError> {
    write_label_csv(&view.rows, schema.labels(), out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectivityRow {
    pub label: String,
    pub positive: usize,
    pub negative: usize,
    pub subjective_mention: usize,
}

impl SubjectivityRow {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.subjective_mention
    }

    pub fn subjective_rate(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.subjective_mention as f64 / t as f64
        }
    }
}

/// Tri-state distribution per label over the latest annotation of each report.
pub fn subjectivity_report(
    log: &[TriStateAnnotation],
    schema: &LabelSchema,
    annotator: Option<&str>,
) -> Vec<SubjectivityRow> {
    let latest = latest_annotations(log, annotator);
    schema
        .labels()
        .iter()
        .map(|l| {
            let mut row = SubjectivityRow {
                label: l.clone(),
                positive: 0,
                negative: 0,
                subjective_mention: 0,
            };
            for a in latest.values() {
                match a.labels.get(l) {
                    Some(TriState::Positive) => row.positive += 1,
                    Some(TriState::Negative) => row.negative += 1,
                    Some(TriState::SubjectiveMention) => row.subjective_mention += 1,
                    None => {}
                }
            }
            row
        })
        .collect()
}

pub fn write_subjectivity_csv<W: Write>(rows: &[SubjectivityRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "positive",
        "negative",
        "subjective_mention",
        "total",
        "subjective_rate",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.positive.to_string(),
            r.negative.to_string(),
            r.subjective_mention.to_string(),
            r.total().to_string(),
            fmt6(r.subjective_rate()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
