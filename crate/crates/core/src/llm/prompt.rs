use thiserror::Error;

use crate::model::{LabelSchema, ReportRecord};

/// Disease list shown to the model with the canonical schema. It names one
/// label, `Lung Ground Glass`, that the answer template does not ask for.
pub const CANONICAL_DISEASE_LIST: [&str; 16] = [
    "Kidney Stone",
    "Kidney Atrophy",
    "Kidney Lesion",
    "Kidney Cyst",
    "Normal Kidney",
    "Gallstones",
    "Liver Lesion",
    "Biliary Dilatation",
    "Fatty Liver",
    "Normal Liver",
    "Lung Atelectasis",
    "Lung Nodules",
    "Lung Emphysema",
    "Lung Pleural Effusion",
    "Lung Ground Glass",
    "Normal Lung",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("report {0:?} has no findings section")]
    MissingFindings(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

fn quoted_list<S: AsRef<str>>(labels: &[S]) -> String {
    labels
        .iter()
        .map(|l| format!("'{}'", l.as_ref()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The zero-shot classification instructions for `schema`.
pub fn system_prompt(schema: &LabelSchema) -> String {
    let canonical = LabelSchema::canonical();
    let disease_list = if schema.labels() == canonical.labels() {
        quoted_list(&CANONICAL_DISEASE_LIST)
    } else {
        quoted_list(schema.labels())
    };
    let template = schema
        .labels()
        .chunks(4)
        .map(|chunk| {
            chunk
                .iter()
                .map(|l| format!("'{l}': True/False"))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect::<Vec<_>>()
        .join(",\n    ");

    format!(
        "You are an honest radiology report classifier. Identify if only the disease labels in the provided DISEASE_LIST are present in the report.\n\
         \n\
         DISEASE_LIST: [{disease_list}].\n\
         \n\
         Do not hallucinate. Respond True if disease label is present, False if not. JSON format output template:\n\
         \n\
         {{\n  'ID': Subject ID,\n  Decisions: {{\n    {template}\n  }}\n}}.\n\
         \n\
         Respond only in JSON dictionary. Do not use other variables. Do not give explanation. End generation after JSON dictionary is created."
    )
}

/// User message: the report's pseudo-ID followed by its Findings text.
pub fn user_prompt(report_id: &str, findings: &str) -> String {
    format!("Subject ID: {report_id}\n\nFindings:\n{findings}")
}

pub fn build_prompt(record: &ReportRecord, schema: &LabelSchema) -> Result<Prompt, PromptError> {
    let findings = record
        .findings
        .as_deref()
        .ok_or_else(|| PromptError::MissingFindings(record.report_id.clone()))?;
    Ok(Prompt {
        system: system_prompt(schema),
        user: user_prompt(&record.report_id, findings),
    })
}
