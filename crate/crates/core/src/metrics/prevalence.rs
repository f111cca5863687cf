use std::io::Write;

use serde::Serialize;

use super::fmt6;
use crate::model::LabelVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceRow {
    pub label: String,
    pub positives: usize,
    pub negatives: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceTable {
    pub n: usize,
    pub rows: Vec<PrevalenceRow>,
}

/// Positive counts per label over a set of label vectors.
pub fn prevalence_table<'a, I, S>(vectors: I, labels: &[S]) -> PrevalenceTable
where
    I: IntoIterator<Item = &'a LabelVector>,
    S: AsRef<str>,
{
    let mut n = 0;
    let mut positives = vec![0usize; labels.len()];
    for v in vectors {
        n += 1;
        for (j, l) in labels.iter().enumerate() {
            positives[j] += usize::from(v.is_positive(l.as_ref()));
        }
    }
    PrevalenceTable {
        n,
        rows: labels
            .iter()
            .zip(positives)
            .map(|(l, p)| PrevalenceRow {
                label: l.as_ref().to_string(),
                positives: p,
                negatives: n - p,
                rate: if n == 0 { 0.0 } else { p as f64 / n as f64 },
            })
            .collect(),
    }
}

impl PrevalenceTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "positives", "negatives", "n", "rate"])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.positives.to_string(),
                r.negatives.to_string(),
                self.n.to_string(),
                fmt6(r.rate),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
