use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::client::{ChatBackend, ChatMessage, ChatRequest, PromptConfig, TransportError};
use super::parse::CompletionParser;
use super::prompt::build_prompt;
use crate::model::{LabelSchema, LabelVector, PredictionSet, PredictionStatus, ReportRecord};
use crate::rba::NO_FINDINGS;

/// Ledger reason for reports whose calls never produced a completion.
pub const TRANSPORT_FAILURE: &str = "transport";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionOutcome {
    Strict,
    Salvaged,
    ParseFailed,
    TransportFailed,
}

/// Audit record of one report's exchange with the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCompletion {
    pub report_id: String,
    pub labeler: String,
    pub attempts: u32,
    pub outcome: CompletionOutcome,
    /// Completion text, or `None` if every attempt failed in transport.
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelingRun {
    pub predictions: PredictionSet,
    /// One entry per report that was sent to the model, in corpus order.
    pub completions: Vec<RawCompletion>,
}

enum Interpreted {
    Ok(LabelVector, PredictionStatus, Vec<String>),
    Failed(String),
}

fn interpret(raw: &str, expected_id: &str, parser: &CompletionParser) -> Interpreted {
    let mut warnings = Vec::new();
    let (vector, id, status) = match parser.strict(raw) {
        Ok((v, id)) => (v, Some(id), PredictionStatus::Strict),
        Err(strict) => match parser.salvage(raw) {
            Ok((v, id)) => {
                warnings.push(strict.to_string());
                (v, id, PredictionStatus::Salvaged)
            }
            Err(e) => return Interpreted::Failed(e.to_string()),
        },
    };
    match id {
        Some(id) if id != expected_id => {
            warnings.push(format!("id-mismatch: expected {expected_id:?}, got {id:?}"));
            Interpreted::Ok(vector, PredictionStatus::Salvaged, warnings)
        }
        _ => Interpreted::Ok(vector, status, warnings),
    }
}

async fn call_with_retries<B: ChatBackend + ?Sized>(
    backend: &B,
    request: &ChatRequest,
    config: &PromptConfig,
) -> (Result<String, TransportError>, u32) {
    let mut attempt = 1;
    loop {
        match backend.complete(request).await {
            Ok(text) => return (Ok(text), attempt),
            Err(e) if e.is_retryable() && attempt < config.retry.max_attempts => {
                log::debug!("attempt {attempt} failed: {e}");
                tokio::time::sleep(config.retry.backoff(attempt)).await;
                attempt += 1;
            }
            Err(e) => return (Err(e), attempt),
        }
    }
}

/// Sends every report with findings to the model, at most
/// `config.concurrency` at a time. Reports without findings, unparseable
/// completions and exhausted transport retries all land in the error ledger.
pub async fn label_corpus<B: ChatBackend + ?Sized>(
    records: &[ReportRecord],
    backend: &B,
    config: &PromptConfig,
    schema: &LabelSchema,
    labeler_name: &str,
) -> LabelingRun {
    let parser = CompletionParser::new(schema);
    let mut predictions = PredictionSet::new(labeler_name);
    let mut requests = Vec::new();
    for (idx, record) in records.iter().enumerate() {
        match build_prompt(record, schema) {
            Ok(prompt) => requests.push((
                idx,
                ChatRequest {
                    model: config.model.clone(),
                    messages: vec![ChatMessage::system(prompt.system), ChatMessage::user(prompt.user)],
                    temperature: config.temperature,
                    max_tokens: config.max_tokens,
                },
            )),
            Err(_) => {
                if let Err(e) = predictions.insert_error(record.report_id.clone(), NO_FINDINGS) {
                    log::warn!("skipping report: {e}");
                }
            }
        }
    }

    let mut finished: Vec<(usize, Result<String, TransportError>, u32)> = stream::iter(requests)
        .map(|(idx, request)| async move {
            let (result, attempts) = call_with_retries(backend, &request, config).await;
            (idx, result, attempts)
        })
        .buffer_unordered(config.concurrency.max(1))
        .collect()
        .await;
    finished.sort_by_key(|(idx, _, _)| *idx);

    let mut completions = Vec::with_capacity(finished.len());
    for (idx, result, attempts) in finished {
        let report_id = records[idx].report_id.clone();
        let mut audit = RawCompletion {
            report_id: report_id.clone(),
            labeler: labeler_name.to_string(),
            attempts,
            outcome: CompletionOutcome::TransportFailed,
            raw: None,
            reason: None,
            warnings: Vec::new(),
        };
        let inserted = match result {
            Err(e) => {
                audit.reason = Some(e.to_string());
                predictions.insert_error(report_id, TRANSPORT_FAILURE)
            }
            Ok(raw) => {
                let interpreted = interpret(&raw, &report_id, &parser);
                audit.raw = Some(raw);
                match interpreted {
                    Interpreted::Ok(vector, status, warnings) => {
                        for w in &warnings {
                            log::warn!("{report_id}: {w}");
                        }
                        audit.outcome = match status {
                            PredictionStatus::Strict => CompletionOutcome::Strict,
                            _ => CompletionOutcome::Salvaged,
                        };
                        audit.warnings = warnings;
                        predictions.insert(report_id, vector, status)
                    }
                    Interpreted::Failed(reason) => {
                        audit.outcome = CompletionOutcome::ParseFailed;
                        audit.reason = Some(reason.clone());
                        predictions.insert_error(report_id, reason)
                    }
                }
            }
        };
        if let Err(e) = inserted {
            log::warn!("skipping report: {e}");
        }
        completions.push(audit);
    }
    LabelingRun {
        predictions,
        completions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::parse::serialize_completion;
    use crate::llm::RetryPolicy;
    use async_trait::async_trait;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;
    use std::time::Duration;

    /// Replies per report id; each id gets a queue of scripted responses.
    struct Scripted {
        replies: Mutex<HashMap<String, Vec<Result<String, TransportError>>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(entries: Vec<(&str, Vec<Result<String, TransportError>>)>) -> Self {
            Self {
                replies: Mutex::new(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
                calls: AtomicUsize::new(0),
            }
        }
    }

    #[async_trait]
    impl ChatBackend for Scripted {
        async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let user = &request.messages[1].content;
            let id = user
                .lines()
                .next()
                .and_then(|l| l.strip_prefix("Subject ID: "))
                .unwrap()
                .to_string();
            let mut replies = self.replies.lock().unwrap();
            let queue = replies.get_mut(&id).expect("scripted id");
            queue.remove(0)
        }
    }

    fn record(id: &str) -> ReportRecord {
        ReportRecord::new(id, "P", "x").with_findings("Lungs are clear.")
    }

    fn config() -> PromptConfig {
        PromptConfig {
            retry: RetryPolicy {
                max_attempts: 3,
                initial_backoff: Duration::from_millis(1),
                max_backoff: Duration::from_millis(2),
            },
            ..PromptConfig::low_temperature("test")
        }
    }

    fn good(id: &str) -> String {
        let schema = LabelSchema::canonical();
        let mut v = LabelVector::zeros(&schema);
        v.set("Normal Lung", true);
        serialize_completion(id, &v, &schema)
    }

    #[tokio::test]
    async fn outcomes_are_classified() {
        let backend = Scripted::new(vec![
            ("A", vec![Ok(good("A"))]),
            ("B", vec![Ok(format!("Sure: {}", good("B")))]),
            ("C", vec![Ok("I cannot help".into())]),
            ("D", vec![Ok(good("Z"))]),
            (
                "E",
                vec![
                    Err(TransportError::Retryable("503".into())),
                    Err(TransportError::Retryable("503".into())),
                    Err(TransportError::Retryable("503".into())),
                ],
            ),
            ("F", vec![Err(TransportError::Retryable("429".into())), Ok(good("F"))]),
        ]);
        let mut records: Vec<ReportRecord> = ["A", "B", "C", "D", "E", "F"].iter().map(|i| record(i)).collect();
        records.push(ReportRecord::new("G", "P", "no header"));
        let run = label_corpus(&records, &backend, &config(), &LabelSchema::canonical(), "llm").await;
        let p = &run.predictions;
        assert_eq!(p.status_of("A"), PredictionStatus::Strict);
        assert_eq!(p.status_of("B"), PredictionStatus::Salvaged);
        assert_eq!(p.status_of("D"), PredictionStatus::Salvaged);
        assert_eq!(p.status_of("F"), PredictionStatus::Strict);
        assert!(p.predictions["A"].is_positive("Normal Lung"));
        let reason = |id: &str| p.errors.iter().find(|e| e.report_id == id).unwrap().reason.clone();
        assert!(reason("C").starts_with("missing:"));
        assert_eq!(reason("E"), TRANSPORT_FAILURE);
        assert_eq!(reason("G"), NO_FINDINGS);
        assert_eq!(p.len(), 7);

        let ids: Vec<&str> = run.completions.iter().map(|c| c.report_id.as_str()).collect();
        assert_eq!(ids, ["A", "B", "C", "D", "E", "F"]);
        assert_eq!(run.completions[4].attempts, 3);
        assert_eq!(run.completions[4].raw, None);
        assert_eq!(run.completions[5].attempts, 2);
        assert!(run.completions[3].warnings.iter().any(|w| w.starts_with("id-mismatch")));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 9);
    }

    #[tokio::test]
    async fn fatal_errors_are_not_retried() {
        let backend = Scripted::new(vec![("A", vec![Err(TransportError::Fatal("401".into()))])]);
        let run = label_corpus(&[record("A")], &backend, &config(), &LabelSchema::canonical(), "llm").await;
        assert_eq!(run.completions[0].attempts, 1);
        assert_eq!(run.predictions.errors[0].reason, TRANSPORT_FAILURE);
    }
}
