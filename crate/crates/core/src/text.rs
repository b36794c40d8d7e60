//! Corpus cleaning: markup stripping, tokenization, suffix lemmatization,
//! and stopword removal.
//!
//! The whole pipeline is deterministic, rule-based, and self-contained;
//! the stopword list and the lemmatizer's e-restore table ship as data
//! files embedded in the crate.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::Result;

const STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");
const E_RESTORE: &str = include_str!("../data/e_restore.txt");

/// Minimum stem length for any lemmatizer rule to fire.
const MIN_STEM: usize = 3;

fn e_restore_patterns() -> &'static [String] {
    static PATTERNS: OnceLock<Vec<String>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        E_RESTORE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

/// Set of words removed from token streams.
#[derive(Clone, Debug, Default)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in English list (~150 words).
    pub fn english() -> Self {
        Self::parse(STOPWORDS_EN)
    }

    /// One word per line; blank lines and `#` comments are ignored and
    /// entries are lowercased.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Remove angle-bracket markup, replacing each complete tag span with a
/// single space; the rest of the text passes through unchanged.
///
/// A `<` that never closes is treated as literal text. When any tag was
/// removed, leading/trailing whitespace introduced by the substitution is
/// trimmed off.
pub fn strip_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut replaced = false;
    while let Some(open) = rest.find('<') {
        match rest[open..].find('>') {
            Some(close) => {
                out.push_str(&rest[..open]);
                out.push(' ');
                rest = &rest[open + close + 1..];
                replaced = true;
            }
            None => break,
        }
    }
    out.push_str(rest);
    if replaced {
        out.trim().to_string()
    } else {
        out
    }
}

/// Split on every non-alphabetic character, lowercase each piece, and
/// keep only pieces at least two letters long. Pieces carrying digits
/// never survive because digits act as separators.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|ch: char| !ch.is_alphabetic())
        .map(str::to_lowercase)
        .filter(|piece| {
            // lowercasing can introduce combining marks (e.g. dotted I),
            // so the alphabetic check is repeated on the folded piece
            piece.chars().count() >= 2 && piece.chars().all(|c| c.is_alphabetic())
        })
        .collect()
}

/// Reduce an inflected token to a base form via an ordered suffix-rule
/// table, iterated to a fixed point so the result is stable under
/// re-application.
///
/// Rules, first match wins, each requiring the remaining stem to be at
/// least three characters:
/// `"ies" -> "y"`, `"sses" -> "ss"`, `"ing" -> ""`, `"ed" -> ""`
/// (both with an `e` restored when the stem ends in a pattern from the
/// e-restore table), and trailing `"s" -> ""` unless the token ends in
/// `"ss"`.
pub fn lemmatize(token: &str) -> String {
    let mut current = token.to_string();
    loop {
        let next = lemmatize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn lemmatize_once(token: &str) -> String {
    if let Some(stem) = token.strip_suffix("ies") {
        if stem.chars().count() >= MIN_STEM {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = token.strip_suffix("sses") {
        if stem.chars().count() >= MIN_STEM {
            return format!("{stem}ss");
        }
    }
    if let Some(stem) = token.strip_suffix("ing") {
        if stem.chars().count() >= MIN_STEM {
            return restore_e(stem);
        }
    }
    if let Some(stem) = token.strip_suffix("ed") {
        if stem.chars().count() >= MIN_STEM {
            return restore_e(stem);
        }
    }
    if !token.ends_with("ss") {
        if let Some(stem) = token.strip_suffix('s') {
            if stem.chars().count() >= MIN_STEM {
                return stem.to_string();
            }
        }
    }
    token.to_string()
}

fn restore_e(stem: &str) -> String {
    if e_restore_patterns().iter().any(|p| stem.ends_with(p.as_str())) {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

/// Order-preserving filter dropping every token present in `stops`.
pub fn remove_stopwords(tokens: Vec<String>, stops: &StopwordList) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stops.contains(t))
        .collect()
}

/// Full cleaning pipeline: strip markup, tokenize, lemmatize each token,
/// then remove stopwords, in exactly that order.
pub fn clean_document(text: &str, stops: &StopwordList) -> Vec<String> {
    let stripped = strip_markup(text);
    let tokens = tokenize(&stripped)
        .into_iter()
        .map(|t| lemmatize(&t))
        .collect();
    remove_stopwords(tokens, stops)
}
