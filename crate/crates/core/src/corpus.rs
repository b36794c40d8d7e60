//! On-disk formats and corpus plumbing: line-delimited document records,
//! vocabulary files, model checkpoints, run reports, and the
//! deterministic train/validation/test split.
//!
//! All formats are plain UTF-8 text so they stay trivially parseable from
//! any language.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::{featurize, FeatureScheme, Vocabulary};
use crate::model::{LabeledExample, ModelParams};
use crate::rng::{substream, StreamKind};

/// One corpus record: a unique id, an optional class label, and the
/// document text (raw markup or cleaned tokens, depending on the stage).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub label: Option<String>,
    pub text: String,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, label: Option<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label,
            text: text.into(),
        }
    }
}

fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(value: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid escape sequence \\{}", other.map(String::from).unwrap_or_default()),
                })
            }
        }
    }
    Ok(out)
}

/// Serialize one record: tab-separated `key=value` fields (`id`, optional
/// `label`, `text`), with backslash escapes for tabs and newlines.
pub fn format_record(doc: &RawDocument) -> String {
    let mut line = format!("id={}", escape(&doc.id));
    if let Some(label) = &doc.label {
        let _ = write!(line, "\tlabel={}", escape(label));
    }
    let _ = write!(line, "\ttext={}", escape(&doc.text));
    line
}

/// Parse one record line; `line_no` is 1-based and reported in errors.
pub fn parse_record(line: &str, line_no: usize) -> Result<RawDocument> {
    if line.trim().is_empty() {
        return Err(Error::Parse {
            line: line_no,
            message: "blank line where a document record was expected".to_string(),
        });
    }
    let mut id = None;
    let mut label = None;
    let mut text = None;
    for field in line.split('\t') {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("field {field:?} is not key=value"),
        })?;
        let value = unescape(value, line_no)?;
        let slot = match key {
            "id" => &mut id,
            "label" => &mut label,
            "text" => &mut text,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown field {other:?}"),
                })
            }
        };
        if slot.replace(value).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate field {key:?}"),
            });
        }
    }
    let id = id.filter(|v| !v.is_empty()).ok_or_else(|| Error::Parse {
        line: line_no,
        message: "record is missing a non-empty id".to_string(),
    })?;
    let text = text.ok_or_else(|| Error::Parse {
        line: line_no,
        message: "record is missing a text field".to_string(),
    })?;
    Ok(RawDocument { id, label, text })
}

/// Read a line-delimited corpus. Ids must be unique; an empty file is an
/// error.
pub fn read_corpus<P: AsRef<Path>>(path: P) -> Result<Vec<RawDocument>> {
    let content = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in content.lines().enumerate() {
        let line_no = index + 1;
        let doc = parse_record(line, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate document id {:?}", doc.id),
            });
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}

pub fn write_corpus<P: AsRef<Path>>(path: P, docs: &[RawDocument]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&format_record(doc));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a vocabulary: a `# documents=N` header followed by one
/// `token<TAB>index<TAB>doc_freq` line per entry, sorted by index.
pub fn write_vocabulary<P: AsRef<Path>>(path: P, vocab: &Vocabulary) -> Result<()> {
    let mut out = format!("# documents={}\n", vocab.num_documents());
    for (token, index, df) in vocab.entries() {
        let _ = writeln!(out, "{token}\t{index}\t{df}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_vocabulary<P: AsRef<Path>>(path: P) -> Result<Vocabulary> {
    let content = std::fs::read_to_string(path)?;
    let mut num_documents = None;
    let mut entries: Vec<(String, usize, usize)> = Vec::new();
    for (index, line) in content.lines().enumerate() {
        let line_no = index + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("documents=") {
                num_documents = Some(value.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("bad document count: {e}"),
                })?);
            }
            continue;
        }
        let mut parts = line.split('\t');
        let (token, idx, df) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(i), Some(d), None) => (t, i, d),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected token<TAB>index<TAB>doc_freq".to_string(),
                })
            }
        };
        let idx: usize = idx.parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad index: {e}"),
        })?;
        let df: usize = df.parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad doc_freq: {e}"),
        })?;
        entries.push((token.to_string(), idx, df));
    }
    let num_documents = num_documents.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing '# documents=N' header".to_string(),
    })?;
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut token_to_index = BTreeMap::new();
    let mut doc_freq = vec![0usize; entries.len()];
    for (token, index, df) in entries {
        if index >= doc_freq.len() {
            return Err(Error::Parse {
                line: 1,
                message: format!("index {index} out of range for {} entries", doc_freq.len()),
            });
        }
        doc_freq[index] = df;
        token_to_index.insert(token, index);
    }
    Vocabulary::from_parts(token_to_index, doc_freq, num_documents)
}

const CHECKPOINT_ORDER: &str = "weights-row-major-then-biases";

/// Write a model checkpoint: four header lines (`version`, `classes`,
/// `features`, `order`) followed by one parameter per line in decimal
/// text at full round-trip precision.
pub fn write_checkpoint<P: AsRef<Path>>(path: P, model: &ModelParams) -> Result<()> {
    let mut out = format!(
        "version 1\nclasses {}\nfeatures {}\norder {}\n",
        model.num_classes(),
        model.num_features(),
        CHECKPOINT_ORDER
    );
    for value in model.flatten() {
        let _ = writeln!(out, "{value}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn header_value<'a>(line: Option<&'a str>, key: &str, line_no: usize) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .map(str::trim)
        .ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected checkpoint header line starting with {key:?}"),
        })
}

pub fn read_checkpoint<P: AsRef<Path>>(path: P) -> Result<ModelParams> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    let version = header_value(lines.next(), "version", 1)?;
    if version != "1" {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported checkpoint version {version:?}"),
        });
    }
    let classes: usize = header_value(lines.next(), "classes", 2)?
        .parse()
        .map_err(|e| Error::Parse {
            line: 2,
            message: format!("bad class count: {e}"),
        })?;
    let features: usize = header_value(lines.next(), "features", 3)?
        .parse()
        .map_err(|e| Error::Parse {
            line: 3,
            message: format!("bad feature count: {e}"),
        })?;
    let order = header_value(lines.next(), "order", 4)?;
    if order != CHECKPOINT_ORDER {
        return Err(Error::Parse {
            line: 4,
            message: format!("unknown flattening order {order:?}"),
        });
    }
    let expected = classes * features + classes;
    let mut values = Vec::with_capacity(expected);
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 5;
        let value: f64 = line.trim().parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad parameter value: {e}"),
        })?;
        values.push(value);
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: 5,
            message: format!(
                "expected {expected} parameter values for {classes} classes x {features} features, found {}",
                values.len()
            ),
        });
    }
    ModelParams::from_flat(classes, features, &values)
}

/// Write a flat `key = value` report file.
pub fn write_key_values<P: AsRef<Path>>(path: P, entries: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (key, value) in entries {
        let _ = writeln!(out, "{key} = {value}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a flat `key = value` file; later keys override earlier ones.
/// Blank lines and `#` comments are ignored.
pub fn read_key_values<P: AsRef<Path>>(path: P) -> Result<Vec<(String, String)>> {
    let content = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (index, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: index + 1,
            message: format!("expected key = value, got {raw:?}"),
        })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Deterministic train/validation/test split of `n` documents.
///
/// A function of `(n, fractions, seed)` only: the corpus is shuffled by a
/// dedicated seeded stream and cut at the rounded fraction boundaries.
/// Fractions must be positive and sum to 1. Each returned index list is
/// sorted ascending.
pub fn split_indices(
    n: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (train, val, test) = fractions;
    for f in [train, val, test] {
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "split fractions must be positive, got {fractions:?}"
            )));
        }
    }
    if (train + val + test - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut substream(seed, StreamKind::Split));
    let cut1 = ((n as f64) * train).round() as usize;
    let cut2 = (((n as f64) * (train + val)).round() as usize).clamp(cut1, n);
    let cut1 = cut1.min(cut2);
    let mut train_idx = indices[..cut1].to_vec();
    let mut val_idx = indices[cut1..cut2].to_vec();
    let mut test_idx = indices[cut2..].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((train_idx, val_idx, test_idx))
}

/// Sorted label-name-to-class-index mapping over all labeled documents.
pub fn label_mapping(docs: &[RawDocument]) -> Result<BTreeMap<String, usize>> {
    let names: std::collections::BTreeSet<&str> = docs
        .iter()
        .filter_map(|d| d.label.as_deref())
        .collect();
    if names.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two distinct labels, found {}",
            names.len()
        )));
    }
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(index, name)| (name.to_string(), index))
        .collect())
}

/// Featurize cleaned documents (whitespace-separated tokens) into labeled
/// examples using a shared label mapping.
pub fn examples_from_docs(
    docs: &[RawDocument],
    vocab: &Vocabulary,
    scheme: FeatureScheme,
    labels: &BTreeMap<String, usize>,
) -> Result<Vec<LabeledExample>> {
    docs.iter()
        .map(|doc| {
            let name = doc.label.as_deref().ok_or_else(|| {
                Error::InvalidParameter(format!("document {:?} has no label", doc.id))
            })?;
            let label = *labels.get(name).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "document {:?} has unknown label {name:?}",
                    doc.id
                ))
            })?;
            let tokens: Vec<String> = doc.text.split_whitespace().map(str::to_string).collect();
            Ok(LabeledExample::new(
                featurize(&tokens, vocab, scheme),
                label,
            ))
        })
        .collect()
}
