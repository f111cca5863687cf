//! Loading and writing the files subcommands exchange.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use radlabel_core::ingest::{load_corpus, Corpus};
use radlabel_core::io::{read_label_csv, read_predictions};
use radlabel_core::{LabelSchema, LabelVector, PredictionSet};

use crate::error::{data, usage, CliResult};

pub fn load_schema(path: Option<&Path>) -> CliResult<LabelSchema> {
    match path {
        None => Ok(LabelSchema::canonical()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
            LabelSchema::from_json(&text).map_err(|e| data(format!("{}: {e}", p.display())))
        }
    }
}

pub fn read_corpus(path: &Path) -> CliResult<Corpus> {
    let loaded = load_corpus(path).map_err(data)?;
    for e in &loaded.row_errors {
        log::warn!("{}: {e}", path.display());
    }
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    Ok(loaded.corpus)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

pub fn read_preds(path: &Path) -> CliResult<PredictionSet> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("labeler");
    read_predictions(open(path)?, stem).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Label matrix from a labels CSV, or the predictions of a JSONL file.
pub fn read_label_table(path: &Path, schema: &LabelSchema) -> CliResult<BTreeMap<String, LabelVector>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        return Ok(read_preds(path)?.predictions);
    }
    read_label_csv(open(path)?, schema).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| data(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

/// Runs `body` against a fresh output file and flushes it.
pub fn write_with<F, E>(path: &Path, body: F) -> CliResult
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), E>,
    E: std::fmt::Display,
{
    let mut out = create(path)?;
    body(&mut out).map_err(|e| data(format!("writing {}: {e}", path.display())))?;
    out.flush()
        .map_err(|e| data(format!("writing {}: {e}", path.display())))
}

/// One report id per line; blank lines and `#` comments are skipped.
pub fn read_ids(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Resolves `--labels`: label names, or organ system names standing for
/// their disease labels. Empty means every schema label.
pub fn resolve_labels(schema: &LabelSchema, requested: &[String]) -> CliResult<Vec<String>> {
    if requested.is_empty() {
        return Ok(schema.labels().to_vec());
    }
    let mut keep = Vec::new();
    for name in requested.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        match schema.organ(name) {
            Some(organ) => keep.extend(organ.disease_labels.iter().cloned()),
            None => keep.push(name.to_string()),
        }
    }
    schema.resolve_subset(&keep).map_err(usage)
}
