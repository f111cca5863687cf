//! Tokenization and whole-word phrase matching.

/// Lowercases and splits on anything that is not alphanumeric, then folds plurals.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| fold_plural(&t.to_lowercase()))
        .collect()
}

/// Static suffix rules: `-ies` to `-y`, `-es` after a sibilant, and a bare `-s`
/// unless the word ends in `ss`, `us` or `is`.
pub(crate) fn fold_plural(token: &str) -> String {
    let n = token.len();
    if n > 4 && token.ends_with("ies") {
        return format!("{}y", &token[..n - 3]);
    }
    if n > 3 && token.ends_with("es") {
        let stem = &token[..n - 2];
        if ["s", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s)) {
            return stem.to_string();
        }
    }
    if n > 3 && token.ends_with('s') && !token.ends_with("ss") && !token.ends_with("us") && !token.ends_with("is") {
        return token[..n - 1].to_string();
    }
    token.to_string()
}

/// A lexicon entry: the original lowercase term and its folded tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub text: String,
    tokens: Vec<String>,
}

impl Term {
    pub fn new(text: &str) -> Self {
        let text = text.trim().to_lowercase();
        let tokens = tokenize(&text);
        Self { text, tokens }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Token ranges `[start, end)` where the term occurs in `tokens`.
    pub(crate) fn find_in(&self, tokens: &[String]) -> Vec<(usize, usize)> {
        let k = self.tokens.len();
        if k == 0 || tokens.len() < k {
            return Vec::new();
        }
        (0..=tokens.len() - k)
            .filter(|&i| tokens[i..i + k] == self.tokens[..])
            .map(|i| (i, i + k))
            .collect()
    }
}

/// Number of token positions separating two ranges; 0 when they overlap,
/// 1 when adjacent.
pub(crate) fn token_distance(a: (usize, usize), b: (usize, usize)) -> usize {
    if a.1 <= b.0 {
        b.0 - a.1 + 1
    } else if b.1 <= a.0 {
        a.0 - b.1 + 1
    } else {
        0
    }
}
