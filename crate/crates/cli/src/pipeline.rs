use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use radlabel_core::ensemble::{majority_vote, TiePolicy};
use radlabel_core::ingest::{load_reports, tfidf_suggest_terms, ColumnMapping, ReportFormat, SectionConfig};
use radlabel_core::io::{write_jsonl, write_predictions};
use radlabel_core::llm::{label_corpus, CompletionOutcome, HttpChatBackend, PromptConfig, RetryPolicy};
use radlabel_core::rba::{load_lexicon, Lexicon, RuleBasedLabeler, NO_FINDINGS};
use radlabel_core::sampling::{random_supplement, sample_disagreement_set, stratified_patient_split, SplitItem};
use radlabel_core::LabelSchema;

use crate::error::{data, usage, CliError, CliResult};
use crate::files::{read_corpus, read_label_table, read_preds, resolve_labels, write_with};

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw report file.
    #[arg(long)]
    reports: PathBuf,
    /// jsonl or csv; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<ReportFormat>,
    /// JSON object renaming source columns to report_id/patient_id/text/findings.
    #[arg(long = "map")]
    mapping: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn ingest(a: IngestArgs) -> CliResult {
    let format = match a.format {
        Some(f) => f,
        None => a
            .reports
            .extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| usage("cannot infer --format from the file name"))?
            .parse()
            .map_err(usage)?,
    };
    let mapping = a
        .mapping
        .as_deref()
        .map(ColumnMapping::load)
        .transpose()
        .map_err(data)?;
    let loaded = load_reports(&a.reports, format, mapping.as_ref()).map_err(data)?;
    for e in &loaded.row_errors {
        log::warn!("{}: skipped {e}", a.reports.display());
    }
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    let corpus = loaded.corpus.sectioned(&SectionConfig::default());
    let without = corpus.records().iter().filter(|r| r.findings.is_none()).count();
    write_with(&a.out, |out| corpus.write_jsonl(out))?;
    println!(
        "ingest: {} reports ({} without findings, {} rows skipped) -> {}",
        corpus.len(),
        without,
        loaded.row_errors.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct RbaArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Lexicon JSON (defaults to the built-in lexicon).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Labeler name recorded in the output.
    #[arg(long, default_value = "rba")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

pub fn rba(a: RbaArgs, schema: &LabelSchema) -> CliResult {
    let lexicon = match &a.lexicon {
        Some(p) => load_lexicon(p, schema),
        None => Lexicon::embedded(schema),
    }
    .map_err(data)?;
    let corpus = read_corpus(&a.corpus)?;
    let labeler = RuleBasedLabeler::new(lexicon, schema.clone());
    let preds = labeler.label_corpus(corpus.records(), &a.name);
    write_with(&a.out, |out| write_predictions(&preds, out))?;
    println!(
        "rba: {} predictions, {} errors -> {}",
        preds.predictions.len(),
        preds.errors.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct LlmArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Model name sent to the endpoint.
    #[arg(long)]
    model: String,
    /// Sampling temperature in [0, 2]; the endpoint default when omitted.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 512)]
    max_tokens: u32,
    /// Maximum requests in flight.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Attempts per report on transport failures.
    #[arg(long, default_value_t = 3)]
    max_attempts: u32,
    /// Initial retry delay in milliseconds; doubles per attempt.
    #[arg(long, default_value_t = 500)]
    backoff_ms: u64,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Endpoint base URL; falls back to RL_LLM_BASE_URL.
    #[arg(long)]
    base_url: Option<String>,
    /// Labeler name recorded in the output (defaults to the model name).
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Audit log of every raw completion.
    #[arg(long)]
    audit: PathBuf,
}

pub fn llm(a: LlmArgs, schema: &LabelSchema) -> CliResult {
    let config = PromptConfig {
        model: a.model.clone(),
        temperature: a.temperature,
        max_tokens: Some(a.max_tokens),
        retry: RetryPolicy {
            max_attempts: a.max_attempts,
            initial_backoff: Duration::from_millis(a.backoff_ms),
            ..RetryPolicy::default()
        },
        concurrency: a.concurrency,
    };
    config.validate().map_err(usage)?;
    let backend =
        HttpChatBackend::from_env(a.base_url.as_deref(), Duration::from_secs(a.timeout_secs)).map_err(usage)?;
    let corpus = read_corpus(&a.corpus)?;
    let name = a.name.unwrap_or_else(|| a.model.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(data)?;
    let run = runtime.block_on(label_corpus(corpus.records(), &backend, &config, schema, &name));

    write_with(&a.audit, |out| write_jsonl(&run.completions, out))?;
    write_with(&a.out, |out| write_predictions(&run.predictions, out))?;
    let count = |o: CompletionOutcome| run.completions.iter().filter(|c| c.outcome == o).count();
    let transport = count(CompletionOutcome::TransportFailed);
    println!(
        "llm: {} strict, {} salvaged, {} unparseable, {} transport failures, {} without findings -> {}",
        count(CompletionOutcome::Strict),
        count(CompletionOutcome::Salvaged),
        count(CompletionOutcome::ParseFailed),
        transport,
        run.predictions
            .errors
            .iter()
            .filter(|e| e.reason == NO_FINDINGS)
            .count(),
        a.out.display()
    );
    if transport > 0 && transport == run.completions.len() {
        let detail = run.completions[0].reason.clone().unwrap_or_default();
        return Err(CliError::Transport(format!(
            "every request to {} failed: {detail}",
            backend.url()
        )));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct VoteArgs {
    /// Prediction files, two or more.
    #[arg(long, num_args = 2.., required = true)]
    preds: Vec<PathBuf>,
    /// negative, positive or reject-even.
    #[arg(long, default_value = "negative")]
    tie: TiePolicy,
    #[arg(long)]
    out: PathBuf,
}

pub fn vote(a: VoteArgs) -> CliResult {
    let sets = a.preds.iter().map(|p| read_preds(p)).collect::<CliResult<Vec<_>>>()?;
    let out = majority_vote(&sets, a.tie).map_err(data)?;
    write_with(&a.out, |w| write_predictions(&out, w))?;
    println!(
        "vote: {} predictions, {} incomplete -> {}",
        out.predictions.len(),
        out.errors.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Corpus JSONL (supplies patient ids).
    #[arg(long)]
    corpus: PathBuf,
    /// Labels per report: a labels CSV or a predictions JSONL.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    train_frac: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-label frequency deviation report.
    #[arg(long)]
    deviations: Option<PathBuf>,
    /// Deviation (percentage points) above which a warning is printed.
    #[arg(long, default_value_t = 2.0)]
    tolerance: f64,
}

pub fn split(a: SplitArgs, schema: &LabelSchema) -> CliResult {
    let corpus = read_corpus(&a.corpus)?;
    let table = read_label_table(&a.labels, schema)?;
    let unlabeled: Vec<&str> = corpus.ids().filter(|id| !table.contains_key(*id)).collect();
    if !unlabeled.is_empty() {
        return Err(data(format!(
            "{} reports have no labels (first: {})",
            unlabeled.len(),
            unlabeled[0]
        )));
    }
    let items: Vec<SplitItem> = corpus
        .records()
        .iter()
        .map(|r| SplitItem {
            report_id: &r.report_id,
            patient_id: &r.patient_id,
            labels: &table[&r.report_id],
        })
        .collect();
    let split = stratified_patient_split(&items, schema.labels(), a.train_frac, a.seed).map_err(usage)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    write_with(&a.out, |w| split.write_csv(w))?;
    if let Some(p) = &a.deviations {
        write_with(p, |w| split.write_deviation_csv(w))?;
    }
    let worst = split.max_deviation_pp();
    if worst > a.tolerance {
        log::warn!(
            "largest per-label deviation {worst:.2} pp exceeds {:.2} pp",
            a.tolerance
        );
    }
    println!(
        "split: {} train / {} test reports, {} patients, max deviation {:.2} pp -> {}",
        split.count(radlabel_core::sampling::Side::Train),
        split.count(radlabel_core::sampling::Side::Test),
        split.patients.len(),
        worst,
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Panel prediction files in category order.
    #[arg(long, num_args = 2.., required = true)]
    preds: Vec<PathBuf>,
    /// Reports drawn per label and agreement category.
    #[arg(long, default_value_t = 10)]
    quota: usize,
    /// Additional reports drawn uniformly from the rest of the corpus.
    #[arg(long, default_value_t = 0)]
    supplement: usize,
    /// Corpus for the supplement pool (defaults to every id in the prediction files).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Labels or organ systems to stratify on, comma separated.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Selected report ids, one per line.
    #[arg(long)]
    out: PathBuf,
    /// Category prevalence table (defaults to <out stem>_categories.csv).
    #[arg(long)]
    categories: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn sample(a: SampleArgs, schema: &LabelSchema) -> CliResult {
    let sets = a.preds.iter().map(|p| read_preds(p)).collect::<CliResult<Vec<_>>>()?;
    let labels = resolve_labels(schema, &a.labels)?;
    let drawn = sample_disagreement_set(&sets, &labels, a.quota, a.seed).map_err(data)?;
    let mut selected: BTreeSet<String> = drawn.report_ids.iter().cloned().collect();
    if a.supplement > 0 {
        let pool: Vec<String> = match &a.corpus {
            Some(p) => read_corpus(p)?.ids().map(str::to_string).collect(),
            None => sets
                .iter()
                .flat_map(|s| s.report_ids())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let extra = random_supplement(&pool, &selected, a.supplement, a.seed).map_err(data)?;
        selected.extend(extra);
    }
    write_with(&a.out, |w| selected.iter().try_for_each(|id| writeln!(w, "{id}")))?;
    let categories = a
        .categories
        .clone()
        .unwrap_or_else(|| sibling(&a.out, "_categories.csv"));
    write_with(&categories, |w| drawn.prevalence.write_csv(w))?;
    println!(
        "sample: {} disagreement-sampled + {} supplement = {} reports, full agreement {:.2}% -> {}",
        drawn.report_ids.len(),
        selected.len() - drawn.report_ids.len(),
        selected.len(),
        drawn.prevalence.full_agreement(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct TermsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 50)]
    top: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn terms(a: TermsArgs) -> CliResult {
    let corpus = read_corpus(&a.corpus)?;
    let scores = tfidf_suggest_terms(&corpus, a.top);
    let render = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "term,tfidf,document_frequency")?;
        for s in &scores {
            writeln!(w, "{},{:.6},{}", s.term, s.tfidf, s.document_frequency)?;
        }
        Ok(())
    };
    match &a.out {
        Some(p) => write_with(p, |w| render(w)),
        None => render(&mut std::io::stdout().lock()).map_err(data),
    }
}
