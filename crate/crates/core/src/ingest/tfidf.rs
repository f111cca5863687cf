use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Corpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub term: String,
    pub tfidf: f64,
    pub document_frequency: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TfidfOptions {
    pub bigrams: bool,
}

impl Default for TfidfOptions {
    fn default() -> Self {
        Self { bigrams: true }
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scores every term as `tf * (ln((1 + N) / (1 + df)) + 1)`, where `tf` is the
/// term's total count over the corpus, `N` the number of documents and `df`
/// the number of documents containing it. Sorted by score descending, ties by
/// term.
pub fn tfidf_scores<S: AsRef<str>>(documents: &[S], options: TfidfOptions) -> Vec<TermScore> {
    let n = documents.len() as f64;
    let mut tf: BTreeMap<String, usize> = BTreeMap::new();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in documents {
        let toks = tokens(doc.as_ref());
        let mut terms: Vec<String> = toks.clone();
        if options.bigrams {
            terms.extend(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
        }
        let mut seen = BTreeSet::new();
        for t in terms {
            *tf.entry(t.clone()).or_default() += 1;
            seen.insert(t);
        }
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut scores: Vec<TermScore> = tf
        .into_iter()
        .map(|(term, count)| {
            let d = df[&term];
            let idf = ((1.0 + n) / (1.0 + d as f64)).ln();
            TermScore {
                tfidf: count as f64 * idf + count as f64,
                document_frequency: d,
                term,
            }
        })
        .collect();
    scores.sort_by(|a, b| b.tfidf.total_cmp(&a.tfidf).then_with(|| a.term.cmp(&b.term)));
    scores
}

/// Top `top_k` candidate lexicon terms over the Findings text (raw text when
/// a record has no findings).
pub fn tfidf_suggest_terms(corpus: &Corpus, top_k: usize) -> Vec<TermScore> {
    let docs: Vec<&str> = corpus
        .records()
        .iter()
        .map(|r| r.findings.as_deref().unwrap_or(&r.raw_text))
        .collect();
    let mut scores = tfidf_scores(&docs, TfidfOptions::default());
    scores.truncate(top_k);
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ReportRecord;
    use proptest::prelude::*;

    const UNIGRAMS: TfidfOptions = TfidfOptions { bigrams: false };

    fn score_of(scores: &[TermScore], term: &str) -> f64 {
        scores.iter().find(|s| s.term == term).unwrap().tfidf
    }

    // Oracle values computed by hand:
    //   docs: "cyst cyst liver" / "cyst kidney"; N = 2
    //   cyst:   tf 3, df 2 -> 3 * ln(3/3) + 3 = 3
    //   liver:  tf 1, df 1 -> ln(3/2) + 1 = 1.4054651081081644
    //   kidney: same as liver
    #[test]
    fn two_document_hand_computation() {
        let scores = tfidf_scores(&["Cyst, cyst; liver.", "cyst KIDNEY"], UNIGRAMS);
        assert_eq!(scores.len(), 3);
        assert!((score_of(&scores, "cyst") - 3.0).abs() < 1e-12);
        assert!((score_of(&scores, "liver") - 1.4054651081081644).abs() < 1e-12);
        assert_eq!(scores[0].term, "cyst");
        assert_eq!(scores[0].document_frequency, 2);
        // tie between kidney and liver broken lexicographically
        assert_eq!(scores[1].term, "kidney");
        assert_eq!(scores[2].term, "liver");
    }

    #[test]
    fn bigrams_are_counted() {
        let scores = tfidf_scores(&["pleural effusion", "small pleural effusion"], TfidfOptions::default());
        let s = scores.iter().find(|s| s.term == "pleural effusion").unwrap();
        assert_eq!(s.document_frequency, 2);
        assert!((s.tfidf - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_document_ranks_by_frequency() {
        let scores = tfidf_scores(&["b a c a b a d"], UNIGRAMS);
        let order: Vec<&str> = scores.iter().map(|s| s.term.as_str()).collect();
        assert_eq!(order, ["a", "b", "c", "d"]);
    }

    #[test]
    fn top_k_larger_than_vocabulary() {
        let corpus = Corpus::new(
            vec![
                ReportRecord::new("R1", "P1", "x").with_findings("x"),
                ReportRecord::new("R2", "P2", "y z"),
            ],
            "t",
        )
        .unwrap();
        let scores = tfidf_suggest_terms(&corpus, 100);
        // x, y, z and the bigram "y z"
        assert_eq!(scores.len(), 4);
    }

    proptest! {
        #[test]
        fn permutation_invariant(docs in proptest::collection::vec("[a-c ]{0,12}", 1..6), rot in 0usize..6) {
            let mut rotated = docs.clone();
            let k = rot % docs.len();
            rotated.rotate_left(k);
            prop_assert_eq!(tfidf_scores(&docs, TfidfOptions::default()), tfidf_scores(&rotated, TfidfOptions::default()));
        }

        #[test]
        fn scores_are_non_negative(docs in proptest::collection::vec("[a-d ]{0,12}", 1..6)) {
            for s in tfidf_scores(&docs, TfidfOptions::default()) {
                prop_assert!(s.tfidf >= 0.0);
                prop_assert!(s.document_frequency >= 1);
            }
        }
    }
}
