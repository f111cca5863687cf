//! `radlabel`: label CT report Findings, combine labelers, pick reports for
//! review, collect annotations and score everything.

mod annotate;
mod error;
mod evaluate;
mod files;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "radlabel", version, about = "Multi-label annotation of CT report Findings")]
struct Cli {
    /// Label schema JSON (defaults to the built-in 15-label schema).
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load raw reports, extract Findings, write a corpus JSONL.
    Ingest(pipeline::IngestArgs),
    /// Label a corpus with the rule-based annotator.
    Rba(pipeline::RbaArgs),
    /// Label a corpus through a chat-completions endpoint.
    Llm(pipeline::LlmArgs),
    /// Majority vote over two or more prediction files.
    Vote(pipeline::VoteArgs),
    /// Pairwise Cohen's kappa between prediction files.
    Agree(evaluate::AgreeArgs),
    /// F1 of a prediction file against reference labels.
    Eval(evaluate::EvalArgs),
    /// Patient-exclusive stratified train/test split.
    Split(pipeline::SplitArgs),
    /// Disagreement-driven selection of reports for manual review.
    Sample(pipeline::SampleArgs),
    /// Run the annotation service.
    Annotate(AnnotateCmd),
    /// Export reference labels from an annotation log.
    Export(annotate::ExportArgs),
    /// Positive counts and rates per label.
    Prevalence(evaluate::PrevalenceArgs),
    /// Suggest lexicon terms by TF-IDF over the Findings sections.
    Terms(pipeline::TermsArgs),
}

#[derive(Args, Debug)]
struct AnnotateCmd {
    #[command(subcommand)]
    action: AnnotateAction,
}

#[derive(Subcommand, Debug)]
enum AnnotateAction {
    /// Serve the annotation API (and a UI directory, if given).
    Serve(annotate::ServeArgs),
}

fn run(cli: Cli) -> CliResult {
    let schema = files::load_schema(cli.schema.as_deref())?;
    match cli.command {
        Command::Ingest(a) => pipeline::ingest(a),
        Command::Rba(a) => pipeline::rba(a, &schema),
        Command::Llm(a) => pipeline::llm(a, &schema),
        Command::Vote(a) => pipeline::vote(a),
        Command::Agree(a) => evaluate::agree(a, &schema),
        Command::Eval(a) => evaluate::eval(a, &schema),
        Command::Split(a) => pipeline::split(a, &schema),
        Command::Sample(a) => pipeline::sample(a, &schema),
        Command::Annotate(AnnotateCmd {
            action: AnnotateAction::Serve(a),
        }) => annotate::serve(a, schema),
        Command::Export(a) => annotate::export(a, &schema),
        Command::Prevalence(a) => evaluate::prevalence(a, &schema),
        Command::Terms(a) => pipeline::terms(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            let msg = first.trim_start_matches("error:").trim();
            eprintln!("{}", CliError::Usage(msg.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
