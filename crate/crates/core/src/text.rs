//! Token-level text utilities shared by the curation rules and the predictors.
//!
//! Everything here is deliberately shallow and deterministic: lowercase,
//! drop apostrophes, split on any other non-alphanumeric rune. The stopword
//! list ships with the crate (`data/stopwords.txt`) and is versioned with it.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

const STOPWORD_FILE: &str = include_str!("../data/stopwords.txt");

/// Polarity-flipping words. Kept out of the stopword list so token
/// comparisons can see them; contractions appear in their apostrophe-free
/// tokenized form ("don't" tokenizes to "dont").
pub const NEGATION_TOKENS: &[&str] = &[
    "not", "no", "never", "none", "nothing", "nobody", "nowhere", "neither", "nor", "cannot",
    "cant", "dont", "doesnt", "didnt", "isnt", "arent", "wasnt", "werent", "wont", "wouldnt",
    "shouldnt", "couldnt", "havent", "hasnt", "hadnt", "aint",
];

/// The stopword list shipped with the crate, parsed once.
pub fn default_stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORD_FILE
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty() && !line.starts_with('#'))
            .map(str::to_owned)
            .collect()
    })
}

fn negation_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| NEGATION_TOKENS.iter().copied().collect())
}

pub fn is_negation(token: &str) -> bool {
    negation_set().contains(token)
}

/// Lowercases and splits into alphanumeric runs. Apostrophes are deleted
/// rather than treated as separators so contractions stay one token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch == '\'' {
            continue;
        }
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical form for "same sentence" checks: tokens joined by single spaces.
pub fn normalize_key(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Token set with stopwords removed. Negation tokens survive.
pub fn content_tokens(text: &str, stopwords: &HashSet<String>) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Jaccard similarity over token sets. Two empty sets count as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}
