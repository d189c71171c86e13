//! Bag-of-words vocabulary and fixed-length index sequences.
//!
//! Index layout:
//!
//! | indices    | meaning                                             |
//! |------------|-----------------------------------------------------|
//! | 0          | padding                                             |
//! | 1          | out-of-vocabulary word                              |
//! | 2..=191    | feature buckets: `2 + 10 * feature + bucket`        |
//! | 192..size  | words, most frequent first                          |
//!
//! A sequence holds at most 81 word indices followed by the 19 feature
//! tokens, right-padded to 100. Feature tokens are never truncated.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::corpus::{Annotation, Label};
use crate::error::{Error, Result};
use crate::featext::{extract_features, tokenize, FeatureVector, PolarityLexicon};
use crate::textprep::{preprocess, EmoticonTable};

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const FEATURE_BASE: usize = 2;
pub const FEATURE_BUCKETS: usize = 10;
pub const FIRST_WORD_INDEX: usize = FEATURE_BASE + FeatureVector::LEN * FEATURE_BUCKETS;
pub const MAX_VOCAB: usize = 50_000;
pub const SEQ_LEN: usize = 100;
pub const MAX_WORD_TOKENS: usize = SEQ_LEN - FeatureVector::LEN;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_words(words: Vec<String>) -> Result<Self> {
        if FIRST_WORD_INDEX + words.len() > MAX_VOCAB {
            return Err(Error::Vocabulary(format!(
                "{} words exceed the {MAX_VOCAB}-entry capacity",
                words.len()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), FIRST_WORD_INDEX + i).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    /// Total index space, reserved indices included.
    pub fn size(&self) -> usize {
        FIRST_WORD_INDEX + self.words.len()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(FIRST_WORD_INDEX)
            .and_then(|i| self.words.get(i))
            .map(String::as_str)
    }

    /// One `index<TAB>token` line per word, in index order.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            writeln!(w, "{}\t{}", FIRST_WORD_INDEX + i, word)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let (idx, token) = line
                .split_once('\t')
                .ok_or_else(|| Error::Vocabulary(format!("line {}: expected index<TAB>token", n + 1)))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Vocabulary(format!("line {}: bad index {idx:?}", n + 1)))?;
            let expected = FIRST_WORD_INDEX + words.len();
            if idx != expected {
                return Err(Error::Vocabulary(format!(
                    "line {}: index {idx} out of order, expected {expected}",
                    n + 1
                )));
            }
            words.push(token.to_string());
        }
        Self::from_words(words)
    }
}

/// Ranks tokens by descending frequency (ties in lexicographic order) and
/// keeps as many as fit below `max_size`.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], max_size: usize) -> Result<Vocabulary> {
    if max_size <= FIRST_WORD_INDEX {
        return Err(Error::VocabTooSmall(max_size));
    }
    if max_size > MAX_VOCAB {
        return Err(Error::Vocabulary(format!("max_size {max_size} exceeds {MAX_VOCAB}")));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for text in corpus {
        for token in tokenize(text.as_ref()) {
            *freq.entry(token).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - FIRST_WORD_INDEX);
    Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w).collect())
}

pub fn encode_tokens<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| vocab.index_of(t.as_ref()).unwrap_or(OOV))
        .collect()
}

fn bucket(feature: usize, value: f64) -> usize {
    let scaled = if feature == FeatureVector::SUBJECTIVITY_INDEX {
        10.0 * value
    } else {
        value
    };
    (scaled.max(0.0).floor() as usize).min(FEATURE_BUCKETS - 1)
}

/// Quantizes each feature into one of its ten reserved bucket tokens.
pub fn feature_tokens(f: &FeatureVector) -> [usize; FeatureVector::LEN] {
    let values = f.to_array();
    std::array::from_fn(|k| FEATURE_BASE + FEATURE_BUCKETS * k + bucket(k, values[k]))
}

pub fn assemble(word_indices: &[usize], feature_indices: &[usize; FeatureVector::LEN]) -> Vec<usize> {
    let mut out = Vec::with_capacity(SEQ_LEN);
    out.extend(word_indices.iter().take(MAX_WORD_TOKENS));
    out.extend(feature_indices);
    out.resize(SEQ_LEN, PAD);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub id: String,
    pub indices: Vec<usize>,
    pub label: Option<Label>,
}

/// Raw tweet → preprocessing → features and word indices → sequence.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub table: EmoticonTable,
    pub lexicon: PolarityLexicon,
    pub vocab: Vocabulary,
}

impl TextEncoder {
    pub fn new(table: EmoticonTable, lexicon: PolarityLexicon, vocab: Vocabulary) -> Self {
        Self { table, lexicon, vocab }
    }

    pub fn encode_text(&self, raw: &str) -> Vec<usize> {
        let clean = preprocess(raw, &self.table);
        let words = encode_tokens(&tokenize(&clean), &self.vocab);
        let features = feature_tokens(&extract_features(&clean, &self.lexicon));
        assemble(&words, &features)
    }

    pub fn encode(&self, a: &Annotation) -> EncodedExample {
        EncodedExample {
            id: a.id.clone(),
            indices: self.encode_text(&a.text),
            label: a.label,
        }
    }

    pub fn encode_all(&self, data: &[Annotation]) -> Vec<EncodedExample> {
        data.iter().map(|a| self.encode(a)).collect()
    }
}
