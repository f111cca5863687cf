use std::path::PathBuf;

use clap::Args;
use radlabel_core::metrics::{
    bootstrap_f1, f1_from_table, pairwise_kappa_matrix, prevalence_table, write_kappa_csv, write_metrics_csv,
    EvalTable, DEFAULT_LEVEL,
};
use radlabel_core::LabelSchema;

use crate::error::{data, usage, CliResult};
use crate::files::{read_label_table, read_preds, resolve_labels, write_with};

#[derive(Args, Debug)]
pub struct AgreeArgs {
    /// Prediction files, two or more; every pair is compared.
    #[arg(long, num_args = 2.., required = true)]
    preds: Vec<PathBuf>,
    /// Labels or organ systems, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

pub fn agree(a: AgreeArgs, schema: &LabelSchema) -> CliResult {
    let sets = a.preds.iter().map(|p| read_preds(p)).collect::<CliResult<Vec<_>>>()?;
    let labels = resolve_labels(schema, &a.labels)?;
    let pairs = pairwise_kappa_matrix(&sets, &labels).map_err(data)?;
    write_with(&a.out, |w| write_kappa_csv(&pairs, w))?;
    for p in &pairs {
        match &p.summary {
            Some(s) => println!(
                "{} vs {}: median kappa {:.3} (IQR {:.3}-{:.3}) over {} reports",
                p.model_a, p.model_b, s.median, s.iqr_low, s.iqr_high, p.n_reports
            ),
            None => println!(
                "{} vs {}: no kappa defined over {} reports",
                p.model_a, p.model_b, p.n_reports
            ),
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predictions to score.
    #[arg(long)]
    preds: PathBuf,
    /// Reference labels: a labels CSV or a predictions JSONL.
    #[arg(long)]
    truth: PathBuf,
    /// Labels or organ systems, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Bootstrap resamples for confidence intervals; needs --seed.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn eval(a: EvalArgs, schema: &LabelSchema) -> CliResult {
    let pred = read_preds(&a.preds)?;
    let truth = read_label_table(&a.truth, schema)?;
    let labels = resolve_labels(schema, &a.labels)?;
    let table = EvalTable::build(&pred, &truth, &labels).map_err(data)?;
    let report = f1_from_table(&table);
    let intervals = match (a.bootstrap, a.seed) {
        (None, _) => None,
        (Some(_), None) => return Err(usage("--bootstrap needs an explicit --seed")),
        (Some(n), Some(seed)) => Some(bootstrap_f1(&table, n, seed, a.level).map_err(usage)?),
    };
    write_with(&a.out, |w| write_metrics_csv(&report, intervals.as_ref(), w))?;
    if !table.excluded.is_empty() {
        log::warn!(
            "{} reference reports excluded: {} has no prediction for them",
            table.excluded.len(),
            pred.labeler_name
        );
    }
    let ci = |m: Option<&radlabel_core::metrics::MetricWithCI>| {
        m.map(|m| format!(" [{:.3}, {:.3}]", m.ci_low, m.ci_high))
            .unwrap_or_default()
    };
    println!(
        "eval {}: macro F1 {:.3}{}, micro F1 {:.3}{} over {} reports ({} excluded)",
        pred.labeler_name,
        report.macro_f1,
        ci(intervals.as_ref().map(|i| &i.macro_f1)),
        report.micro_f1,
        ci(intervals.as_ref().map(|i| &i.micro_f1)),
        report.evaluated,
        report.excluded.len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct PrevalenceArgs {
    /// A labels CSV or a predictions JSONL.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

pub fn prevalence(a: PrevalenceArgs, schema: &LabelSchema) -> CliResult {
    let table = read_label_table(&a.labels, schema)?;
    let prev = prevalence_table(table.values(), schema.labels());
    write_with(&a.out, |w| prev.write_csv(w))?;
    println!("prevalence: {} reports -> {}", prev.n, a.out.display());
    Ok(())
}
