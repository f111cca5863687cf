use serde::{Deserialize, Serialize};

/// A sentence of the Findings text. `start..end` is a byte range into the findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct SegmentConfig {
    /// Lowercase tokens, including their trailing period, that never end a sentence.
    pub protected: Vec<String>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        let protected = [
            "dr.", "vs.", "approx.", "e.g.", "i.e.", "mr.", "mrs.", "ms.", "st.", "fig.", "cf.", "incl.", "ca.",
            "max.", "min.", "sp.", "hx.", "ht.", "wt.",
        ];
        Self {
            protected: protected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Rule-based splitter: a sentence ends at `.`, `!` or `?` followed by
/// whitespace, or at a blank line. Protected abbreviations and numbered-list
/// markers (`1. `) never end a sentence. Decimals never qualify since the
/// period is followed by a digit.
pub fn segment_sentences(findings: &str, config: &SegmentConfig) -> Vec<Sentence> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = findings.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(i);
        }
        let s = start.unwrap_or(i);
        let next = chars.peek().map(|&(_, n)| n);

        let boundary = match c {
            '.' | '!' | '?' => match next {
                None => true,
                Some(n) if n.is_whitespace() => !is_protected(&findings[s..=i], c, config),
                _ => false,
            },
            '\n' => blank_line_follows(&findings[i + 1..]),
            _ => false,
        };
        if boundary {
            let end = s + findings[s..i + c.len_utf8()].trim_end().len();
            spans.push((s, end));
            start = None;
        }
    }
    if let Some(s) = start {
        let end = s + findings[s..].trim_end().len();
        if end > s {
            spans.push((s, end));
        }
    }

    spans
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| Sentence {
            text: findings[start..end].to_string(),
            index,
            start,
            end,
        })
        .collect()
}

// `current` is the sentence so far, ending with the terminal character.
fn is_protected(current: &str, terminal: char, config: &SegmentConfig) -> bool {
    if terminal != '.' {
        return false;
    }
    let token_start = current.rfind(char::is_whitespace).map(|p| p + 1).unwrap_or(0);
    let token = &current[token_start..];
    let bare = token.trim_start_matches(['(', '[', '"', '\'']);
    let lower = bare.to_lowercase();
    if config.protected.contains(&lower) {
        return true;
    }
    let number = &bare[..bare.len() - 1];
    token_start == 0 && !number.is_empty() && number.chars().all(|c| c.is_ascii_digit())
}

fn blank_line_follows(rest: &str) -> bool {
    for c in rest.chars() {
        match c {
            '\n' => return true,
            c if c.is_whitespace() => continue,
            _ => return false,
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split(text: &str) -> Vec<String> {
        segment_sentences(text, &SegmentConfig::default())
            .into_iter()
            .map(|s| s.text)
            .collect()
    }

    #[test]
    fn two_sentences() {
        assert_eq!(
            split("Lungs are clear. No effusion."),
            ["Lungs are clear.", "No effusion."]
        );
    }

    #[test]
    fn decimal_measurement_is_protected() {
        assert_eq!(
            split("Lesion measures 1.2 cm in the liver."),
            ["Lesion measures 1.2 cm in the liver."]
        );
    }

    #[test]
    fn empty_input() {
        assert!(split("").is_empty());
        assert!(split("   \n ").is_empty());
    }

    #[test]
    fn abbreviations_are_protected() {
        assert_eq!(
            split("Discussed with Dr. Smith. Cyst vs. lesion, approx. 2 cm."),
            ["Discussed with Dr. Smith.", "Cyst vs. lesion, approx. 2 cm."]
        );
    }

    #[test]
    fn numbered_list_markers_are_protected() {
        assert_eq!(
            split("1. Small nodule. 2. No effusion."),
            ["1. Small nodule.", "2. No effusion."]
        );
        // a number closing a sentence is not a list marker
        assert_eq!(split("Count is 5. Next."), ["Count is 5.", "Next."]);
    }

    #[test]
    fn blank_line_ends_a_sentence() {
        assert_eq!(
            split("LUNGS: clear\n\nLIVER: normal"),
            ["LUNGS: clear", "LIVER: normal"]
        );
        assert_eq!(split("Lungs are\nclear."), ["Lungs are\nclear."]);
    }

    #[test]
    fn spans_index_into_findings() {
        let text = "  A b. C d?  E f!";
        for s in segment_sentences(text, &SegmentConfig::default()) {
            assert_eq!(&text[s.start..s.end], s.text);
        }
    }

    proptest! {
        #[test]
        fn gaps_between_spans_are_whitespace(text in "[a-zA-Z0-9 .!?\n]{0,80}") {
            let sentences = segment_sentences(&text, &SegmentConfig::default());
            let mut cursor = 0;
            for (i, s) in sentences.iter().enumerate() {
                prop_assert_eq!(s.index, i);
                prop_assert!(s.start >= cursor);
                prop_assert!(text[cursor..s.start].chars().all(char::is_whitespace));
                prop_assert_eq!(&text[s.start..s.end], s.text.as_str());
                cursor = s.end;
            }
            prop_assert!(text[cursor..].chars().all(char::is_whitespace));
        }

        #[test]
        fn idempotent_on_single_sentences(text in "[a-zA-Z0-9 .!?\n]{0,80}") {
            let first = segment_sentences(&text, &SegmentConfig::default());
            prop_assert_eq!(&first, &segment_sentences(&text, &SegmentConfig::default()));
            for s in first {
                let again = segment_sentences(&s.text, &SegmentConfig::default());
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].text, &s.text);
            }
        }
    }
}
