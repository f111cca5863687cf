//! Agreement-pattern categories across a labeler panel and the sampler
//! that draws from each of them.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SamplingError;
use crate::metrics::fmt6;
use crate::model::PredictionSet;

/// Category index of one vote pattern: Σ predᵢ·2^(k−1−i).
pub fn combination_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| acc << 1 | usize::from(b))
}

/// Inverse of [`combination_index`] for a `k`-member panel.
pub fn combination_pattern(index: usize, k: usize) -> Vec<bool> {
    (0..k).map(|i| index >> (k - 1 - i) & 1 == 1).collect()
}

/// A, B, C, ... for indices 0, 1, 2, ...; `C<index>` beyond Z.
pub fn category_letter(index: usize) -> String {
    if index < 26 {
        char::from(b'A' + index as u8).to_string()
    } else {
        format!("C{index}")
    }
}

/// Reports every panel member predicted, in id order.
pub fn covered_reports(preds: &[PredictionSet]) -> Vec<String> {
    let Some(first) = preds.first() else { return Vec::new() };
    first
        .predictions
        .keys()
        .filter(|id| preds.iter().all(|p| p.predictions.contains_key(*id)))
        .cloned()
        .collect()
}

/// Category of every covered report for one label.
pub fn combination_assign(preds: &[PredictionSet], label: &str) -> Result<BTreeMap<String, usize>, SamplingError> {
    if preds.is_empty() || preds.len() > 16 {
        return Err(SamplingError::PanelSize(preds.len()));
    }
    covered_reports(preds)
        .into_iter()
        .map(|id| {
            let bits = preds
                .iter()
                .map(|p| {
                    p.predictions[&id]
                        .get(label)
                        .ok_or_else(|| SamplingError::MissingLabel {
                            labeler: p.labeler_name.clone(),
                            label: label.to_string(),
                        })
                })
                .collect::<Result<Vec<bool>, _>>()?;
            Ok((id, combination_index(&bits)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRow {
    pub letter: String,
    pub pattern: Vec<bool>,
    /// Mean over labels of the category's share of covered reports, in percent.
    pub percent: f64,
}

/// Average category prevalence table: one row per vote pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryPrevalence {
    pub models: Vec<String>,
    pub rows: Vec<CategoryRow>,
}

impl CategoryPrevalence {
    /// Share of reports on which every member agreed (all-0 plus all-1 rows).
    pub fn full_agreement(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(z)) if self.rows.len() > 1 => a.percent + z.percent,
            (Some(a), _) => a.percent,
            _ => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.percent).sum()
    }

    pub fn percent(&self, letter: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.letter == letter).map(|r| r.percent)
    }

    /// `category,<model>...,prevalence_pct`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["category".to_string()];
        header.extend(self.models.iter().cloned());
        header.push("prevalence_pct".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.letter.clone()];
            rec.extend(r.pattern.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
            rec.push(fmt6(r.percent));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, SamplingError> {
        let bad = |m: String| SamplingError::Table(m);
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() < 3 || &header[0] != "category" || &header[header.len() - 1] != "prevalence_pct" {
            return Err(bad("expected columns category,<models...>,prevalence_pct".into()));
        }
        let models: Vec<String> = header
            .iter()
            .skip(1)
            .take(header.len() - 2)
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let pattern = (1..=models.len())
                .map(|i| match &rec[i] {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(bad(format!("pattern cell {other:?} is not 0/1"))),
                })
                .collect::<Result<Vec<bool>, _>>()?;
            let percent = rec[models.len() + 1]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("prevalence {:?}: {e}", &rec[models.len() + 1])))?;
            rows.push(CategoryRow {
                letter: rec[0].to_string(),
                pattern,
                percent,
            });
        }
        Ok(Self { models, rows })
    }
}

/// Mean category prevalence over `labels`.
pub fn category_prevalence<S: AsRef<str>>(
    preds: &[PredictionSet],
    labels: &[S],
) -> Result<CategoryPrevalence, SamplingError> {
    let k = preds.len();
    let mut sums = vec![0.0; 1 << k.min(16)];
    let mut used = 0;
    for label in labels {
        let cats = combination_assign(preds, label.as_ref())?;
        if cats.is_empty() {
            continue;
        }
        used += 1;
        let mut counts = vec![0usize; sums.len()];
        for c in cats.values() {
            counts[*c] += 1;
        }
        for (s, c) in sums.iter_mut().zip(counts) {
            *s += 100.0 * c as f64 / cats.len() as f64;
        }
    }
    Ok(CategoryPrevalence {
        models: preds.iter().map(|p| p.labeler_name.clone()).collect(),
        rows: sums
            .into_iter()
            .enumerate()
            .map(|(i, s)| CategoryRow {
                letter: category_letter(i),
                pattern: combination_pattern(i, k),
                percent: if used == 0 { 0.0 } else { s / used as f64 },
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryDraw {
    pub label: String,
    pub letter: String,
    pub available: usize,
    pub drawn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisagreementSample {
    /// Sorted, de-duplicated.
    pub report_ids: Vec<String>,
    pub draws: Vec<CategoryDraw>,
    pub prevalence: CategoryPrevalence,
}

/// For each label and each category, draws up to `quota` reports uniformly
/// at random; the result is the union over all draws.
pub fn sample_disagreement_set<S: AsRef<str>>(
    preds: &[PredictionSet],
    labels: &[S],
    quota: usize,
    seed: u64,
) -> Result<DisagreementSample, SamplingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = BTreeSet::new();
    let mut draws = Vec::new();
    for label in labels {
        let cats = combination_assign(preds, label.as_ref())?;
        let mut members: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
        for (id, c) in &cats {
            members.entry(*c).or_default().push(id);
        }
        for c in 0..1usize << preds.len() {
            let pool = members.get(&c).map(Vec::as_slice).unwrap_or(&[]);
            let picked: Vec<&&String> = pool.choose_multiple(&mut rng, quota.min(pool.len())).collect();
            draws.push(CategoryDraw {
                label: label.as_ref().to_string(),
                letter: category_letter(c),
                available: pool.len(),
                drawn: picked.len(),
            });
            chosen.extend(picked.into_iter().map(|s| (*s).clone()));
        }
    }
    Ok(DisagreementSample {
        report_ids: chosen.into_iter().collect(),
        draws,
        prevalence: category_prevalence(preds, labels)?,
    })
}

/// `n` reports drawn uniformly without replacement from `ids` minus `exclude`.
pub fn random_supplement(
    ids: &[String],
    exclude: &BTreeSet<String>,
    n: usize,
    seed: u64,
) -> Result<Vec<String>, SamplingError> {
    let mut pool: Vec<&String> = ids.iter().filter(|id| !exclude.contains(*id)).collect();
    pool.sort();
    pool.dedup();
    if n > pool.len() {
        return Err(SamplingError::NotEnough {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut out: Vec<String> = pool.into_iter().take(n).cloned().collect();
    out.sort();
    Ok(out)
}
