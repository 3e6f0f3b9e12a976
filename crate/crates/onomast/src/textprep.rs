//! Name normalization, bi-char tokenization, vocabulary pruning, and encoding.
//!
//! Names are title-cased, split into overlapping two-character tokens
//! (`"Smith"` → `Sm, mi, it, th`), filtered through a frequency-pruned
//! vocabulary, and packed into fixed-length index sequences. Sequences are
//! pre-padded and pre-truncated: padding sits at the front, and over-long
//! names keep their trailing window so the characters nearest the end of the
//! name are the ones adjacent to the recurrent model's final state.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::NameRecord;
use crate::error::{Error, Result};

/// Index reserved for padding. Row 0 of the embedding.
pub const PAD_INDEX: usize = 0;
/// Index reserved for out-of-vocabulary tokens. Row 1 of the embedding.
pub const OOV_INDEX: usize = 1;

/// Which part of the name feeds the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameMode {
    /// Last name alone.
    LastOnly,
    /// Last name, a space, then first name.
    Full,
}

/// Preprocessing knobs. Defaults follow the reference pipeline: window 20 for
/// last-name mode, 25 for full-name mode, tokens kept only when they occur at
/// least 3 times and in at most 30% of the sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub mode: NameMode,
    pub window: usize,
    pub min_count: usize,
    pub max_doc_fraction: f64,
}

impl PrepConfig {
    pub fn for_mode(mode: NameMode) -> Self {
        let window = match mode {
            NameMode::LastOnly => 20,
            NameMode::Full => 25,
        };
        Self {
            mode,
            window,
            min_count: 3,
            max_doc_fraction: 0.30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::InvalidConfig("window must be >= 1".into()));
        }
        if self.min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be >= 1".into()));
        }
        if !(self.max_doc_fraction > 0.0 && self.max_doc_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "max_doc_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A normalized name, plus whether full-name mode had to fall back to the
/// last name because the record carries no first name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub degraded: bool,
}

fn title_case_word(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut chars = word.chars();
    if let Some(first) = chars.next() {
        out.extend(first.to_uppercase());
    }
    for ch in chars {
        out.extend(ch.to_lowercase());
    }
    out
}

fn title_case(text: &str) -> String {
    text.split_whitespace()
        .map(title_case_word)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Title-case a record's name. Last-name mode uses the last name alone;
/// full-name mode concatenates last name, one space, first name. A full-name
/// request on a record without a first name degrades to the last name rather
/// than failing, since real files have gaps.
pub fn normalize(record: &NameRecord, mode: NameMode) -> Normalized {
    let last = title_case(&record.last_name);
    match mode {
        NameMode::LastOnly => Normalized {
            text: last,
            degraded: false,
        },
        NameMode::Full => match record.first_name.as_deref() {
            Some(first) if !first.trim().is_empty() => Normalized {
                text: format!("{} {}", last, title_case(first)),
                degraded: false,
            },
            _ => Normalized {
                text: last,
                degraded: true,
            },
        },
    }
}

/// Split a name into overlapping two-character tokens.
///
/// All consecutive windows of the string are kept, including any that span
/// the space between last and first name; those space tokens are what encodes
/// the word boundary. A one-character name yields that character as its only
/// token so no record degenerates to all padding.
pub fn bichar_tokenize(name: &str) -> Result<Vec<String>> {
    let chars: Vec<char> = name.chars().collect();
    match chars.len() {
        0 => Err(Error::EmptyName),
        1 => Ok(vec![chars[0].to_string()]),
        _ => Ok(chars.windows(2).map(|w| w.iter().collect()).collect()),
    }
}

/// Bi-char token table. Indices 0 and 1 are reserved for padding and
/// out-of-vocabulary tokens; real tokens occupy `2..2 + tokens.len()` in
/// descending corpus-frequency order (ties broken lexicographically), so the
/// same corpus always rebuilds the same mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Rebuild from the ordered token list (as stored in a model container).
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let token_to_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 2))
            .collect();
        Self {
            tokens,
            token_to_index,
        }
    }

    /// Number of real tokens, excluding the pad and OOV slots.
    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Size of the index space: tokens plus the pad and OOV slots. This is
    /// the embedding row count.
    pub fn index_space(&self) -> usize {
        self.tokens.len() + 2
    }

    /// Index for a token, or [`OOV_INDEX`] when it was pruned or never seen.
    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(OOV_INDEX)
    }

    /// Tokens in index order; `tokens()[i]` has index `i + 2`.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Two-column export, one `token<TAB>index` line per token.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&(i + 2).to_string());
            out.push('\n');
        }
        out
    }
}

/// Build a vocabulary from tokenized sequences, pruning tokens that occur
/// fewer than `min_count` times in total or in more than `max_doc_fraction`
/// of the sequences.
pub fn build_vocabulary(corpus: &[Vec<String>], config: &PrepConfig) -> Result<Vocabulary> {
    config.validate()?;
    let n_docs = corpus.len();
    if n_docs == 0 {
        return Err(Error::EmptyVocabulary);
    }

    let mut total: HashMap<&str, u64> = HashMap::new();
    let mut docs: HashMap<&str, u64> = HashMap::new();
    let mut seen = HashSet::new();
    for seq in corpus {
        seen.clear();
        for tok in seq {
            *total.entry(tok.as_str()).or_insert(0) += 1;
            if seen.insert(tok.as_str()) {
                *docs.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
    }

    let mut kept: Vec<(&str, u64)> = total
        .into_iter()
        .filter(|&(tok, count)| {
            let doc_fraction = docs[tok] as f64 / n_docs as f64;
            count >= config.min_count as u64 && doc_fraction <= config.max_doc_fraction
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    Ok(Vocabulary::from_tokens(
        kept.into_iter().map(|(tok, _)| tok.to_string()).collect(),
    ))
}

/// Fixed-length index sequence ready for the model. `indices.len()` always
/// equals the window; positions before `window - true_length` are pad.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSequence {
    pub indices: Vec<usize>,
    pub true_length: usize,
}

/// Map tokens to indices and fit them into `window` slots: unknown tokens
/// become [`OOV_INDEX`], over-long lists keep their last `window` entries,
/// short lists are front-padded with [`PAD_INDEX`].
pub fn encode(tokens: &[String], vocab: &Vocabulary, window: usize) -> EncodedSequence {
    debug_assert!(window >= 1);
    let start = tokens.len().saturating_sub(window);
    let mapped = tokens[start..].iter().map(|t| vocab.index_of(t));
    let true_length = tokens.len() - start;
    let mut indices = vec![PAD_INDEX; window - true_length];
    indices.extend(mapped);
    EncodedSequence {
        indices,
        true_length,
    }
}

/// Normalize, tokenize, and encode one record. `None` when the name
/// normalizes to nothing (whitespace-only last name).
pub fn encode_record(
    record: &NameRecord,
    vocab: &Vocabulary,
    config: &PrepConfig,
) -> Option<EncodedSequence> {
    let normalized = normalize(record, config.mode);
    let tokens = bichar_tokenize(&normalized.text).ok()?;
    Some(encode(&tokens, vocab, config.window))
}

/// Tokenized forms of a record set under one mode, skipping records whose
/// name normalizes to nothing. Returns the surviving token lists paired with
/// the indices of the records they came from.
pub fn tokenize_records(records: &[NameRecord], mode: NameMode) -> (Vec<Vec<String>>, Vec<usize>) {
    let mut token_lists = Vec::with_capacity(records.len());
    let mut kept = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let normalized = normalize(record, mode);
        if let Ok(tokens) = bichar_tokenize(&normalized.text) {
            token_lists.push(tokens);
            kept.push(i);
        }
    }
    (token_lists, kept)
}
