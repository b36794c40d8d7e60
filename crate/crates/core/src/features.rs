//! Vocabulary construction and sparse featurization of cleaned token
//! streams.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Token-to-index map with document frequencies.
///
/// Indices form a bijection onto `[0, V)` assigned in lexicographic token
/// order, so construction is deterministic regardless of corpus document
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: BTreeMap<String, usize>,
    // document frequency per index
    doc_freq: Vec<usize>,
    num_documents: usize,
}

impl Vocabulary {
    pub(crate) fn from_parts(
        token_to_index: BTreeMap<String, usize>,
        doc_freq: Vec<usize>,
        num_documents: usize,
    ) -> Result<Self> {
        if token_to_index.len() != doc_freq.len() {
            return Err(Error::InvalidParameter(format!(
                "vocabulary has {} tokens but {} frequency entries",
                token_to_index.len(),
                doc_freq.len()
            )));
        }
        let mut seen = vec![false; token_to_index.len()];
        for (&index, token) in token_to_index.values().zip(token_to_index.keys()) {
            if index >= seen.len() || seen[index] {
                return Err(Error::InvalidParameter(format!(
                    "vocabulary indices are not a bijection onto [0, V): token {token:?} has index {index}"
                )));
            }
            seen[index] = true;
        }
        if num_documents == 0 {
            return Err(Error::InvalidParameter(
                "vocabulary must cover at least one document".to_string(),
            ));
        }
        Ok(Self {
            token_to_index,
            doc_freq,
            num_documents,
        })
    }

    /// Number of distinct tokens, `V`.
    pub fn len(&self) -> usize {
        self.token_to_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_to_index.is_empty()
    }

    pub fn num_documents(&self) -> usize {
        self.num_documents
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    /// Entries in lexicographic (equivalently, index) order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, usize)> + '_ {
        self.token_to_index
            .iter()
            .map(|(token, &index)| (token.as_str(), index, self.doc_freq[index]))
    }
}

/// Sparse map from feature index to non-negative weight.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    entries: BTreeMap<usize, f64>,
    num_features: usize,
}

impl FeatureVector {
    pub fn empty(num_features: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            num_features,
        }
    }

    /// Validates that indices lie below `num_features` and weights are
    /// finite and non-negative.
    pub fn from_entries<I>(entries: I, num_features: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut map = BTreeMap::new();
        for (index, weight) in entries {
            if index >= num_features {
                return Err(Error::DimensionMismatch {
                    expected: num_features,
                    got: index + 1,
                });
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "feature weight at index {index} must be finite and non-negative, got {weight}"
                )));
            }
            map.insert(index, weight);
        }
        Ok(Self {
            entries: map,
            num_features,
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Number of stored (non-zero) entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    /// Entries in ascending index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&i, &w)| (i, w))
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Feature weighting scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureScheme {
    /// Raw term counts.
    #[default]
    Count,
    /// `count(t) * (ln((1 + N) / (1 + df(t))) + 1)`, L2-normalized.
    TfIdf,
}

/// Build a vocabulary over tokens appearing in at least `min_doc_freq`
/// documents.
pub fn build_vocabulary(corpus: &[Vec<String>], min_doc_freq: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_doc_freq == 0 {
        return Err(Error::InvalidParameter(
            "min_doc_freq must be a positive integer".to_string(),
        ));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for token in distinct {
            *df.entry(token).or_insert(0) += 1;
        }
    }
    let mut token_to_index = BTreeMap::new();
    let mut doc_freq = Vec::new();
    for (token, freq) in df {
        if freq >= min_doc_freq {
            token_to_index.insert(token.to_string(), doc_freq.len());
            doc_freq.push(freq);
        }
    }
    if token_to_index.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Vocabulary::from_parts(token_to_index, doc_freq, corpus.len())
}

/// Featurize a token list against a vocabulary.
///
/// Out-of-vocabulary tokens are ignored. `Count` emits raw term counts;
/// `TfIdf` multiplies each count by `ln((1 + N) / (1 + df)) + 1` and
/// L2-normalizes the result whenever any in-vocabulary token is present.
pub fn featurize(tokens: &[String], vocab: &Vocabulary, scheme: FeatureScheme) -> FeatureVector {
    let mut entries: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokens {
        if let Some(index) = vocab.index_of(token) {
            *entries.entry(index).or_insert(0.0) += 1.0;
        }
    }
    if scheme == FeatureScheme::TfIdf {
        let n = vocab.num_documents() as f64;
        for (&index, weight) in entries.iter_mut() {
            let idf = ((1.0 + n) / (1.0 + vocab.doc_freq(index) as f64)).ln() + 1.0;
            *weight *= idf;
        }
        let norm = entries.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for weight in entries.values_mut() {
                *weight /= norm;
            }
        }
    }
    FeatureVector {
        entries,
        num_features: vocab.len(),
    }
}
