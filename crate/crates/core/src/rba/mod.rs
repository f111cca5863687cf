//! Rule-based annotator.
//!
//! Each Findings sentence is scanned for disease descriptors and normal terms.
//! Single-organ descriptors fire on their own; multi-organ descriptors need an
//! organ anchor in the same sentence or an active organ subheader. A
//! descriptor preceded anywhere in its sentence by a negation term is negated;
//! one with a suppressor phrase within `suppressor_window` tokens is
//! suppressed. Sentences containing a qualifier term are low-confidence and
//! cannot establish normality on their own.
//!
//! Per organ system, a disease is positive when any sentence asserts it. With
//! no disease positive, the organ is normal only when every disease is ruled
//! out (negated somewhere, never mentioned, or only mentioned in suppressed
//! form alongside a normal statement for the organ) and a confident normal
//! term was seen. Anything else leaves the organ uncertain: its five labels
//! are 0 and its flag is set.

mod lexicon;
mod text;

pub use lexicon::{load_lexicon, LabelTerms, Lexicon, LexiconError, OrganTerms};
pub use text::Term;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{segment_sentences, SegmentConfig, Sentence};
use crate::model::{LabelSchema, LabelVector, PredictionSet, PredictionStatus, ReportRecord};
use text::{token_distance, tokenize};

/// Ledger reason for a report with no Findings section.
pub const NO_FINDINGS: &str = "no-findings";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RbaError {
    #[error("report {0:?} has no findings section")]
    MissingFindings(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Asserted,
    Negated,
    Suppressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    /// Single-organ descriptor; needs no context.
    Intrinsic,
    AnchorInSentence,
    Subheader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Disease,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentenceFinding {
    pub sentence_index: usize,
    /// Disease label, or the organ's normal label for a normal-term hit.
    pub label: String,
    pub organ: String,
    pub kind: FindingKind,
    pub polarity: Polarity,
    pub matched_term: String,
    pub context: ContextSource,
    /// Set when the sentence carries a qualifier term.
    pub low_confidence: bool,
}

/// Finds descriptor and normal-term hits in one sentence.
pub fn classify_sentence(
    sentence: &Sentence,
    active_subheader_organ: Option<&str>,
    lex: &Lexicon,
) -> Vec<SentenceFinding> {
    let tokens = tokenize(&sentence.text);
    let qualified = lex.qualifiers.iter().any(|q| !q.find_in(&tokens).is_empty());
    let negations: Vec<(usize, usize)> = lex.negations.iter().flat_map(|n| n.find_in(&tokens)).collect();
    let anchored: BTreeSet<&str> = lex
        .organs
        .iter()
        .filter(|o| o.anchors.iter().any(|a| !a.find_in(&tokens).is_empty()))
        .map(|o| o.organ.as_str())
        .collect();
    let context_for = |organ: &str| {
        if anchored.contains(organ) {
            Some(ContextSource::AnchorInSentence)
        } else if active_subheader_organ == Some(organ) {
            Some(ContextSource::Subheader)
        } else {
            None
        }
    };

    let mut out = Vec::new();
    for label in &lex.labels {
        let mut claimed: Vec<(usize, usize)> = Vec::new();
        let mut candidates: Vec<(&Term, ContextSource)> = label
            .single_organ
            .iter()
            .map(|t| (t, ContextSource::Intrinsic))
            .collect();
        if let Some(ctx) = context_for(&label.organ) {
            candidates.extend(label.multi_organ.iter().map(|t| (t, ctx)));
        }
        candidates.sort_by_key(|(t, _)| std::cmp::Reverse(t.len()));

        for (term, context) in candidates {
            for span in term.find_in(&tokens) {
                if claimed.iter().any(|c| c.0 <= span.0 && span.1 <= c.1) {
                    continue;
                }
                claimed.push(span);
                let polarity = if negations.iter().any(|n| n.1 <= span.0) {
                    Polarity::Negated
                } else if label.suppressors.iter().any(|s| {
                    s.find_in(&tokens)
                        .into_iter()
                        .any(|sp| token_distance(sp, span) <= lex.suppressor_window)
                }) {
                    Polarity::Suppressed
                } else {
                    Polarity::Asserted
                };
                out.push(SentenceFinding {
                    sentence_index: sentence.index,
                    label: label.label.clone(),
                    organ: label.organ.clone(),
                    kind: FindingKind::Disease,
                    polarity,
                    matched_term: term.text.clone(),
                    context,
                    low_confidence: qualified,
                });
            }
        }
    }

    for organ in &lex.organs {
        let Some(context) = context_for(&organ.organ) else {
            continue;
        };
        if let Some(term) = organ.normal_terms.iter().find(|t| !t.find_in(&tokens).is_empty()) {
            out.push(SentenceFinding {
                sentence_index: sentence.index,
                label: organ.normal_label.clone(),
                organ: organ.organ.clone(),
                kind: FindingKind::Normal,
                polarity: Polarity::Asserted,
                matched_term: term.text.clone(),
                context,
                low_confidence: qualified,
            });
        }
    }
    out
}

/// Organ contexts opened by subheader lines such as `LUNGS:` or
/// `LIVER/GALLBLADDER: ...`. Each entry is a byte range of the findings text.
/// A context lasts until the next header-like line or a blank line; headers
/// naming no single tracked organ (`BONES:`) just close the current one.
pub fn subheader_regions(findings: &str, lex: &Lexicon) -> Vec<(usize, usize, String)> {
    let mut regions = Vec::new();
    let mut open: Option<(usize, String)> = None;
    let mut offset = 0;
    for line in findings.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let content = line.trim();
        if content.is_empty() {
            if let Some((s, organ)) = open.take() {
                regions.push((s, line_start, organ));
            }
            continue;
        }
        let Some(header) = header_text(content) else {
            continue;
        };
        if let Some((s, organ)) = open.take() {
            regions.push((s, line_start, organ));
        }
        let tokens = tokenize(header);
        let organs: Vec<&OrganTerms> = lex
            .organs
            .iter()
            .filter(|o| o.anchors.iter().any(|a| !a.find_in(&tokens).is_empty()))
            .collect();
        if let [organ] = organs.as_slice() {
            open = Some((line_start, organ.organ.clone()));
        }
    }
    if let Some((s, organ)) = open {
        regions.push((s, findings.len(), organ));
    }
    regions
}

// Text before the first colon when it looks like a short section label.
fn header_text(line: &str) -> Option<&str> {
    let (head, _) = line.split_once(':')?;
    let head = head.trim();
    let words = head.split_whitespace().count();
    let label_like = head
        .chars()
        .all(|c| c.is_alphabetic() || c.is_whitespace() || matches!(c, '/' | '&' | '-' | ','));
    ((1..=5).contains(&words) && label_like).then_some(head)
}

#[derive(Debug, Clone, Default)]
struct DiseaseEvidence {
    asserted: bool,
    negated: bool,
    mentioned: bool,
    unresolved_suppression: bool,
}

/// Resolves per-sentence hits into a label vector.
pub fn resolve(findings: &[SentenceFinding], schema: &LabelSchema) -> LabelVector {
    let mut v = LabelVector::zeros(schema);
    for organ in schema.organs() {
        let normal_sentences: BTreeSet<usize> = findings
            .iter()
            .filter(|f| f.kind == FindingKind::Normal && f.organ == organ.name)
            .map(|f| f.sentence_index)
            .collect();
        let confident_normal = findings
            .iter()
            .any(|f| f.kind == FindingKind::Normal && f.organ == organ.name && !f.low_confidence);

        let evidence: Vec<DiseaseEvidence> = organ
            .disease_labels
            .iter()
            .map(|label| {
                let mut e = DiseaseEvidence::default();
                for f in findings
                    .iter()
                    .filter(|f| f.kind == FindingKind::Disease && &f.label == label)
                {
                    e.mentioned = true;
                    match f.polarity {
                        Polarity::Asserted => e.asserted = true,
                        Polarity::Negated => e.negated = true,
                        Polarity::Suppressed => {
                            if !normal_sentences.contains(&f.sentence_index) {
                                e.unresolved_suppression = true;
                            }
                        }
                    }
                }
                e
            })
            .collect();

        let any_positive = evidence.iter().any(|e| e.asserted);
        for (label, e) in organ.disease_labels.iter().zip(&evidence) {
            v.set(label, e.asserted);
        }
        if any_positive {
            continue;
        }
        let ruled_out = evidence
            .iter()
            .all(|e| e.negated || !e.mentioned || !e.unresolved_suppression);
        if ruled_out && confident_normal {
            v.set(&organ.normal_label, true);
        } else {
            v.uncertain.insert(organ.name.clone(), true);
        }
    }
    v
}

/// The rule-based labeler: a validated lexicon plus segmentation settings.
#[derive(Debug, Clone)]
pub struct RuleBasedLabeler {
    pub lexicon: Lexicon,
    pub schema: LabelSchema,
    pub segment: SegmentConfig,
}

/// Everything the labeler saw in one report.
#[derive(Debug, Clone)]
pub struct ReportTrace {
    pub sentences: Vec<Sentence>,
    pub findings: Vec<SentenceFinding>,
    pub labels: LabelVector,
}

impl RuleBasedLabeler {
    pub fn new(lexicon: Lexicon, schema: LabelSchema) -> Self {
        Self {
            lexicon,
            schema,
            segment: SegmentConfig::default(),
        }
    }

    /// Labeler over the embedded schema and lexicon.
    pub fn with_defaults() -> Self {
        let schema = LabelSchema::canonical();
        let lexicon = Lexicon::embedded(&schema).expect("embedded lexicon is valid");
        Self::new(lexicon, schema)
    }

    pub fn trace_findings(&self, findings: &str) -> ReportTrace {
        let sentences = segment_sentences(findings, &self.segment);
        let regions = subheader_regions(findings, &self.lexicon);
        let mut hits = Vec::new();
        for s in &sentences {
            let active = regions
                .iter()
                .find(|(a, b, _)| *a <= s.start && s.start < *b)
                .map(|(_, _, o)| o.as_str());
            hits.extend(classify_sentence(s, active, &self.lexicon));
        }
        let labels = resolve(&hits, &self.schema);
        ReportTrace {
            sentences,
            findings: hits,
            labels,
        }
    }

    pub fn classify_findings(&self, findings: &str) -> LabelVector {
        self.trace_findings(findings).labels
    }

    pub fn classify_report(&self, record: &ReportRecord) -> Result<LabelVector, RbaError> {
        let findings = record
            .findings
            .as_deref()
            .ok_or_else(|| RbaError::MissingFindings(record.report_id.clone()))?;
        Ok(self.classify_findings(findings))
    }

    /// Labels every record; records without findings go to the error ledger.
    pub fn label_corpus<'a, I>(&self, records: I, labeler_name: &str) -> PredictionSet
    where
        I: IntoIterator<Item = &'a ReportRecord>,
    {
        let mut set = PredictionSet::new(labeler_name);
        for r in records {
            let result = match self.classify_report(r) {
                Ok(v) => set.insert(r.report_id.clone(), v, PredictionStatus::Ok),
                Err(_) => set.insert_error(r.report_id.clone(), NO_FINDINGS),
            };
            if let Err(e) = result {
                log::warn!("skipping report: {e}");
            }
        }
        set
    }
}

/// Classifies one record with an explicit lexicon.
pub fn classify_report(record: &ReportRecord, lex: &Lexicon, schema: &LabelSchema) -> Result<LabelVector, RbaError> {
    RuleBasedLabeler::new(lex.clone(), schema.clone()).classify_report(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_label_vector;
    use proptest::prelude::*;

    fn labeler() -> RuleBasedLabeler {
        RuleBasedLabeler::with_defaults()
    }

    fn sentence(text: &str) -> Sentence {
        Sentence {
            text: text.to_string(),
            index: 0,
            start: 0,
            end: text.len(),
        }
    }

    fn hits(text: &str) -> Vec<SentenceFinding> {
        classify_sentence(&sentence(text), None, &labeler().lexicon)
    }

    fn disease_hits(text: &str) -> Vec<(String, Polarity)> {
        hits(text)
            .into_iter()
            .filter(|f| f.kind == FindingKind::Disease)
            .map(|f| (f.label, f.polarity))
            .collect()
    }

    #[test]
    fn scarring_and_atelectasis_is_asserted() {
        assert_eq!(
            disease_hits("Scarring and atelectasis within the lungs."),
            vec![("Lung Atelectasis".to_string(), Polarity::Asserted)]
        );
    }

    #[test]
    fn gravity_dependent_atelectasis_is_suppressed_and_lungs_are_clear() {
        let h = hits("Aside from minimal subsegmental gravity-dependent atelectasis, the lungs are clear.");
        let atelectasis: Vec<_> = h.iter().filter(|f| f.label == "Lung Atelectasis").collect();
        assert_eq!(atelectasis.len(), 1);
        assert_eq!(atelectasis[0].polarity, Polarity::Suppressed);
        assert!(h
            .iter()
            .any(|f| f.kind == FindingKind::Normal && f.organ == "Lungs/Pleura" && f.matched_term == "clear"));
    }

    #[test]
    fn no_pleural_effusion_is_negated() {
        assert_eq!(
            disease_hits("No pleural effusion."),
            vec![("Lung Pleural Effusion".to_string(), Polarity::Negated)]
        );
    }

    #[test]
    fn anchored_multi_organ_lesion() {
        let h = hits("There are multiple sub-centimeter hypodense lesion in the right kidney which are too small to characterize.");
        let d: Vec<_> = h.iter().filter(|f| f.kind == FindingKind::Disease).collect();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].label, "Kidney Lesion");
        assert_eq!(d[0].polarity, Polarity::Asserted);
        assert_eq!(d[0].context, ContextSource::AnchorInSentence);
        assert_eq!(d[0].matched_term, "lesion");
    }

    #[test]
    fn multi_organ_descriptor_needs_context() {
        assert!(disease_hits("A small nodule is seen.").is_empty());
        let lex = labeler().lexicon;
        let with_header = classify_sentence(&sentence("A small nodule is seen."), Some("Lungs/Pleura"), &lex);
        assert_eq!(with_header.len(), 1);
        assert_eq!(with_header[0].label, "Lung Nodules");
        assert_eq!(with_header[0].context, ContextSource::Subheader);
    }

    #[test]
    fn negation_after_descriptor_does_not_negate() {
        assert_eq!(
            disease_hits("Atelectasis, no change."),
            vec![("Lung Atelectasis".to_string(), Polarity::Asserted)]
        );
        assert_eq!(
            disease_hits("Not atelectasis."),
            vec![("Lung Atelectasis".to_string(), Polarity::Negated)]
        );
    }

    #[test]
    fn negation_scope_crosses_commas() {
        assert_eq!(
            disease_hits("No hydronephrosis, but a small kidney stone."),
            vec![("Kidney Stone".to_string(), Polarity::Negated)]
        );
    }

    #[test]
    fn longest_descriptor_claims_its_tokens() {
        let h = disease_hits("Right pulmonary nodule.");
        assert_eq!(h, vec![("Lung Nodules".to_string(), Polarity::Asserted)]);
    }

    #[test]
    fn qualifier_marks_low_confidence() {
        let h = hits("The lungs are clear, however limited by motion.");
        assert!(h.iter().all(|f| f.low_confidence));
    }

    #[test]
    fn normal_report() {
        let v = labeler().classify_findings("Lungs are clear. Kidneys unremarkable. Liver unremarkable.");
        for (label, value) in &v.decisions {
            assert_eq!(*value, label.starts_with("Normal"), "{label}");
        }
        assert!(v.uncertain.values().all(|u| !u));
    }

    // Hand trace: "cholelithiasis" is a single-organ descriptor for Gallstones,
    // so Gallstones=1 and the liver organ is positive (Normal Liver=0). Kidneys
    // and lungs are never mentioned and have no normal term: uncertain.
    #[test]
    fn cholelithiasis_only() {
        let v = labeler().classify_findings("Cholelithiasis is noted.");
        assert!(v.is_positive("Gallstones"));
        assert!(!v.is_positive("Normal Liver"));
        assert!(!v.is_uncertain("Liver/Gallbladder"));
        assert!(v.is_uncertain("Kidneys/Ureters"));
        assert!(v.is_uncertain("Lungs/Pleura"));
        assert_eq!(v.decisions.values().filter(|x| **x).count(), 1);
    }

    #[test]
    fn dependent_atelectasis_alone_leaves_lungs_uncertain() {
        let v = labeler().classify_findings("There is mild bibasilar dependent atelectasis.");
        assert!(!v.is_positive("Lung Atelectasis"));
        assert!(!v.is_positive("Normal Lung"));
        assert!(v.is_uncertain("Lungs/Pleura"));
    }

    #[test]
    fn suppressed_mention_beside_normal_statement_is_normal() {
        let v = labeler()
            .classify_findings("Aside from minimal subsegmental gravity-dependent atelectasis, the lungs are clear.");
        assert!(!v.is_positive("Lung Atelectasis"));
        assert!(v.is_positive("Normal Lung"));
    }

    #[test]
    fn qualified_normal_statement_cannot_establish_normality() {
        let v = labeler().classify_findings("Lungs are clear or minimally hypoinflated.");
        assert!(!v.is_positive("Normal Lung"));
        assert!(v.is_uncertain("Lungs/Pleura"));
    }

    #[test]
    fn negated_disease_with_normal_term_is_normal() {
        let v = labeler().classify_findings("No pleural effusion. The lungs are clear.");
        assert!(v.is_positive("Normal Lung"));
    }

    #[test]
    fn subheaders_give_context_until_blank_line() {
        let text = "LUNGS:\nSmall nodule in the right upper lobe.\n\nA 2 mm nodule of the thyroid.\nLIVER: Normal.";
        let lab = labeler();
        let regions = subheader_regions(text, &lab.lexicon);
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].2, "Lungs/Pleura");
        let trace = lab.trace_findings(text);
        let nodules: Vec<_> = trace.findings.iter().filter(|f| f.label == "Lung Nodules").collect();
        assert_eq!(nodules.len(), 1);
        assert!(trace.labels.is_positive("Lung Nodules"));
        assert!(trace.labels.is_positive("Normal Liver"));
    }

    #[test]
    fn non_organ_header_closes_context() {
        let lab = labeler();
        let text = "LUNGS: Clear.\nBONES: Nodule in the rib.";
        let regions = subheader_regions(text, &lab.lexicon);
        assert_eq!(regions.len(), 1);
        assert!(!lab.classify_findings(text).is_positive("Lung Nodules"));
    }

    #[test]
    fn missing_findings_is_an_error() {
        let r = ReportRecord::new("R9", "P", "no header");
        assert_eq!(
            labeler().classify_report(&r),
            Err(RbaError::MissingFindings("R9".into()))
        );
        let set = labeler().label_corpus([&r], "rba");
        assert_eq!(set.errors[0].reason, NO_FINDINGS);
    }

    fn phrase() -> impl Strategy<Value = String> {
        prop::sample::select(vec![
            "No pleural effusion.",
            "Lungs are clear.",
            "Kidneys unremarkable.",
            "Liver is normal.",
            "Small renal cyst.",
            "Mild dependent atelectasis.",
            "Hepatic steatosis.",
            "No gallstones.",
            "Possible nodule in the lung or scar.",
            "LUNGS:\nNodule.\n",
            "Emphysema.",
            "No biliary dilatation, however the liver is enlarged.",
        ])
        .prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn outputs_are_always_valid(parts in proptest::collection::vec(phrase(), 0..6)) {
            let lab = labeler();
            let text = parts.join(" ");
            let v = lab.classify_findings(&text);
            prop_assert!(validate_label_vector(&v, &lab.schema).is_empty());
            prop_assert_eq!(v, lab.classify_findings(&text));
        }

        #[test]
        fn appended_assertion_turns_label_on(parts in proptest::collection::vec(phrase(), 0..6), pick in 0usize..4) {
            let lab = labeler();
            let (label, sentence) = [
                ("Lung Nodules", "There is a nodule in the left lung."),
                ("Kidney Stone", "Nephrolithiasis is present."),
                ("Fatty Liver", "Hepatic steatosis."),
                ("Lung Pleural Effusion", "Small right pleural effusion."),
            ][pick];
            let text = format!("{} {}", parts.join(" "), sentence);
            let v = lab.classify_findings(&text);
            prop_assert!(v.is_positive(label));
            let organ = lab.schema.organ_of(label).unwrap();
            prop_assert!(!v.is_positive(&organ.normal_label));
        }
    }
}
