use regex::Regex;

use crate::model::ReportRecord;

/// Header aliases for the Findings section and the sections that end it.
#[derive(Debug, Clone)]
pub struct SectionConfig {
    findings: Regex,
    terminators: Regex,
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self::new(
            &["FINDINGS", "FINDING"],
            &["IMPRESSION", "CONCLUSION", "RECOMMENDATIONS", "RECOMMENDATION"],
        )
    }
}

impl SectionConfig {
    pub fn new<S: AsRef<str>>(findings_aliases: &[S], terminator_aliases: &[S]) -> Self {
        Self {
            findings: header_regex(findings_aliases),
            terminators: header_regex(terminator_aliases),
        }
    }

    /// Byte range of the Findings body inside `text`, trimmed. `None` when
    /// no header is found or the section is empty.
    pub fn findings_span(&self, text: &str) -> Option<(usize, usize)> {
        let header = self.findings.find(text)?;
        let rest = &text[header.end()..];
        let body_end = self
            .terminators
            .find(rest)
            .map(|m| header.end() + m.start())
            .unwrap_or(text.len());
        let body = &text[header.end()..body_end];
        let lead = body.len() - body.trim_start().len();
        let trimmed = body.trim();
        if trimmed.is_empty() {
            return None;
        }
        let start = header.end() + lead;
        Some((start, start + trimmed.len()))
    }
}

// An alias counts as a header when followed by a colon, or when it is alone on its line.
fn header_regex<S: AsRef<str>>(aliases: &[S]) -> Regex {
    let mut names: Vec<String> = aliases.iter().map(|a| regex::escape(a.as_ref().trim())).collect();
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    let alt = names.join("|");
    Regex::new(&format!(r"(?im)\b(?:{alt})\b[ \t]*:|^[ \t]*(?:{alt})[ \t]*$")).expect("header regex compiles")
}

/// Fills `findings` from the raw text. Records without a Findings header come
/// back with `findings == None`, which downstream labelers log as `no-findings`.
pub fn extract_findings(record: ReportRecord, config: &SectionConfig) -> ReportRecord {
    let findings = config
        .findings_span(&record.raw_text)
        .map(|(s, e)| record.raw_text[s..e].to_string());
    ReportRecord { findings, ..record }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn findings(text: &str) -> Option<String> {
        extract_findings(ReportRecord::new("R", "P", text), &SectionConfig::default()).findings
    }

    #[test]
    fn inline_headers() {
        assert_eq!(
            findings("FINDINGS: Lungs are clear. IMPRESSION: Normal.").as_deref(),
            Some("Lungs are clear.")
        );
    }

    #[test]
    fn lowercase_headers_on_own_lines() {
        assert_eq!(
            findings("Findings:\nLiver is unremarkable.\n\nImpression:\nNo acute disease.").as_deref(),
            Some("Liver is unremarkable.")
        );
    }

    #[test]
    fn missing_header_is_flagged() {
        assert_eq!(findings("Lungs are clear. Impression: normal."), None);
    }

    #[test]
    fn bare_header_line_without_colon() {
        let text = "TECHNIQUE: CT.\nFINDINGS\nKidneys are normal.\nCONCLUSION: ok";
        assert_eq!(findings(text).as_deref(), Some("Kidneys are normal."));
    }

    #[test]
    fn words_inside_prose_do_not_terminate() {
        let text = "FINDINGS: No impression of the liver contour. Liver is normal.\nIMPRESSION: none";
        assert_eq!(
            findings(text).as_deref(),
            Some("No impression of the liver contour. Liver is normal.")
        );
    }

    #[test]
    fn recommendation_plural_terminates() {
        assert_eq!(findings("Findings: a. Recommendations: b").as_deref(), Some("a."));
    }

    #[test]
    fn custom_aliases() {
        let cfg = SectionConfig::new(&["OBSERVATIONS"], &["SUMMARY"]);
        let r = extract_findings(ReportRecord::new("R", "P", "Observations: cyst. Summary: x"), &cfg);
        assert_eq!(r.findings.as_deref(), Some("cyst."));
    }

    proptest! {
        #[test]
        fn findings_are_always_a_substring(prefix in "[a-zA-Z :\n.]{0,40}", body in "[a-zA-Z :\n.]{0,60}", tail in "[a-zA-Z :\n.]{0,40}") {
            let text = format!("{prefix}FINDINGS:{body}IMPRESSION:{tail}");
            if let Some(f) = findings(&text) {
                prop_assert!(text.contains(&f));
            }
            let plain = format!("{prefix}{body}");
            if let Some(f) = findings(&plain) {
                prop_assert!(plain.contains(&f));
            }
        }
    }
}
