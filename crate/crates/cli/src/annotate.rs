use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use radlabel_core::annotate::{
    derive_view, export_reference, router, serve as serve_router, subjectivity_report, write_subjectivity_csv,
    AnnotationStore, AppState, ReportState, ViewKind, DEFAULT_PORT,
};
use radlabel_core::LabelSchema;

use crate::error::{data, usage, CliResult};
use crate::files::{read_corpus, read_ids, read_preds, write_with};

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Report ids annotators may be assigned (default: the whole corpus).
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Append-only annotation log.
    #[arg(long, default_value = "annotations.jsonl")]
    log: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Show these labelers' predictions next to each report.
    #[arg(long)]
    preds: Vec<PathBuf>,
    #[arg(long)]
    show_predictions: bool,
    /// Static UI files served at /.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Open (or resume) a session over --ids for this annotator at startup.
    #[arg(long)]
    annotator: Option<String>,
}

pub fn serve(a: ServeArgs, schema: LabelSchema) -> CliResult {
    if a.show_predictions && a.preds.is_empty() {
        return Err(usage("--show-predictions needs at least one --preds file"));
    }
    let corpus = read_corpus(&a.corpus)?;
    let known: BTreeSet<String> = corpus.ids().map(str::to_string).collect();
    let ids = match &a.ids {
        Some(p) => read_ids(p)?,
        None => known.iter().cloned().collect(),
    };
    let mut store = AnnotationStore::open(&a.log, schema, Some(known)).map_err(data)?;
    if let Some(who) = &a.annotator {
        let open = store
            .sessions()
            .find(|s| s.annotator_id == *who && s.queue == ids && s.count(ReportState::Pending) > 0)
            .map(|s| s.session_id.clone());
        let session_id = match open {
            Some(id) => id,
            None => store.start_session(who, ids.clone()).map_err(data)?.session_id,
        };
        println!("session {session_id} for {who}");
    }
    let mut state = AppState::new(store, corpus.into_records());
    state.predictions = a.preds.iter().map(|p| read_preds(p)).collect::<CliResult<Vec<_>>>()?;
    state.show_predictions = a.show_predictions;
    let app = router(Arc::new(state), a.ui_dir.clone());

    let runtime = tokio::runtime::Runtime::new().map_err(data)?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| usage(format!("cannot listen on {addr}: {e}")))?;
        println!("annotation service on http://{addr} (log {})", a.log.display());
        serve_router(listener, app).await.map_err(data)
    })
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long, default_value = "annotations.jsonl")]
    log: PathBuf,
    /// actionable (subjective mentions negative) or mention (positive).
    #[arg(long)]
    view: ViewKind,
    /// Only this annotator's annotations.
    #[arg(long)]
    annotator: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Per-label tri-state counts.
    #[arg(long)]
    subjectivity: Option<PathBuf>,
}

pub fn export(a: ExportArgs, schema: &LabelSchema) -> CliResult {
    if !a.log.exists() {
        return Err(data(format!("annotation log {} does not exist", a.log.display())));
    }
    let store = AnnotationStore::open(&a.log, schema.clone(), None).map_err(data)?;
    let view = derive_view(store.annotations(), a.view, schema, a.annotator.as_deref());
    write_with(&a.out, |w| export_reference(&view, schema, w))?;
    if let Some(p) = &a.subjectivity {
        let rows = subjectivity_report(store.annotations(), schema, a.annotator.as_deref());
        write_with(p, |w| write_subjectivity_csv(&rows, w))?;
    }
    println!("export: {} reports -> {}", view.rows.len(), a.out.display());
    Ok(())
}
