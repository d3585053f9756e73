//! Progress-note normalization and n-gram extraction.

use std::collections::{BTreeMap, BTreeSet};

use super::{VectorizeError, VectorizerConfig};

/// Shipped English stopword list.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

fn is_numeric_literal(token: &str) -> bool {
    let mut parts = token.splitn(2, '.');
    let whole = parts.next().unwrap_or("");
    let frac = parts.next();
    !whole.is_empty()
        && whole.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

/// Lowercases, strips punctuation, replaces integer and decimal literals by
/// the configured placeholder, and drops stopwords.
///
/// Punctuation becomes a token boundary, except a `.` between two digits,
/// which is kept so decimals survive as a single literal.
pub fn preprocess_note(text: &str, config: &VectorizerConfig) -> Vec<String> {
    let lower: Vec<char> = text.to_lowercase().chars().collect();
    let mut cleaned = String::with_capacity(lower.len());
    for (i, &c) in lower.iter().enumerate() {
        let decimal_point = c == '.'
            && i > 0
            && lower[i - 1].is_ascii_digit()
            && lower.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_alphanumeric() || c.is_whitespace() || decimal_point {
            cleaned.push(c);
        } else {
            cleaned.push(' ');
        }
    }
    cleaned
        .split_whitespace()
        .filter_map(|tok| {
            if is_numeric_literal(tok) {
                Some(config.numeric_placeholder.clone())
            } else {
                let tok: String = tok.chars().filter(|&c| c != '.').collect();
                (!tok.is_empty() && !config.stopwords.contains(&tok)).then_some(tok)
            }
        })
        .collect()
}

/// Multiset of n-grams (n = 1 or 2) with multiplicities. Bigrams join adjacent
/// tokens with one space.
pub fn extract_ngrams(tokens: &[String], n: usize) -> Result<BTreeMap<String, usize>, VectorizeError> {
    if !(1..=2).contains(&n) {
        return Err(VectorizeError::UnsupportedN(n));
    }
    let mut out = BTreeMap::new();
    for window in tokens.windows(n) {
        *out.entry(window.join(" ")).or_insert(0) += 1;
    }
    Ok(out)
}
