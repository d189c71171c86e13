//! Hand-engineered tweet features.
//!
//! Nineteen values per tweet, computed from preprocessed text: lexicon
//! sentiment counts, auxiliary verb counts, a lexicon subjectivity ratio,
//! difficult/easy word counts, punctuation counts, pronoun counts and
//! singular/plural verb counts.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

const BUNDLED_LEXICON: &str = include_str!("../assets/lexicon.tsv");

/// Polarity magnitude above which a word counts as positive or negative.
pub const SENTIMENT_THRESHOLD: f64 = 0.1;

/// Minimum estimated syllables for a difficult word.
pub const DIFFICULT_SYLLABLES: usize = 3;

const SINGULAR_VERBS: [&str; 5] = ["is", "was", "has", "does", "am"];
const PLURAL_VERBS: [&str; 4] = ["are", "were", "have", "do"];

#[derive(Debug, Clone, Default)]
pub struct PolarityLexicon {
    words: HashMap<String, f64>,
}

impl PolarityLexicon {
    pub fn new(words: HashMap<String, f64>) -> Result<Self> {
        for (word, &polarity) in &words {
            if !(-1.0..=1.0).contains(&polarity) {
                return Err(Error::Lexicon(format!(
                    "{word:?} has polarity {polarity} outside [-1, 1]"
                )));
            }
            if word.to_lowercase() != *word {
                return Err(Error::Lexicon(format!("{word:?} is not lowercase")));
            }
        }
        Ok(Self { words })
    }

    /// `word<TAB>polarity` lines; `#` comments and blank lines skipped.
    /// Words are lowercased on load.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = HashMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Lexicon(format!("line {}: expected word<TAB>polarity", n + 1)))?;
            let polarity: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Lexicon(format!("line {}: bad polarity {value:?}", n + 1)))?;
            words.insert(word.to_lowercase(), polarity);
        }
        Self::new(words)
    }

    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_LEXICON.as_bytes()).expect("bundled lexicon is valid")
    }

    pub fn polarity(&self, word: &str) -> Option<f64> {
        self.words.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// The nineteen features, in their fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeatureVector {
    pub pos_count: f64,
    pub neg_count: f64,
    pub neu_count: f64,
    pub aux_is: f64,
    pub aux_was: f64,
    pub aux_are: f64,
    pub aux_were: f64,
    pub subjectivity: f64,
    pub difficult_count: f64,
    pub easy_count: f64,
    pub question_count: f64,
    pub exclaim_count: f64,
    pub period_count: f64,
    pub pron_they: f64,
    pub pron_he: f64,
    pub pron_she: f64,
    pub pron_we: f64,
    pub verb_singular: f64,
    pub verb_plural: f64,
}

impl FeatureVector {
    pub const LEN: usize = 19;

    pub const NAMES: [&'static str; Self::LEN] = [
        "pos_count",
        "neg_count",
        "neu_count",
        "aux_is",
        "aux_was",
        "aux_are",
        "aux_were",
        "subjectivity",
        "difficult_count",
        "easy_count",
        "question_count",
        "exclaim_count",
        "period_count",
        "pron_they",
        "pron_he",
        "pron_she",
        "pron_we",
        "verb_singular",
        "verb_plural",
    ];

    /// Position of the only non-count feature.
    pub const SUBJECTIVITY_INDEX: usize = 7;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.pos_count,
            self.neg_count,
            self.neu_count,
            self.aux_is,
            self.aux_was,
            self.aux_are,
            self.aux_were,
            self.subjectivity,
            self.difficult_count,
            self.easy_count,
            self.question_count,
            self.exclaim_count,
            self.period_count,
            self.pron_they,
            self.pron_he,
            self.pron_she,
            self.pron_we,
            self.verb_singular,
            self.verb_plural,
        ]
    }

    /// Counts are non-negative integers and subjectivity lies in `[0, 1]`.
    pub fn is_valid(&self) -> bool {
        self.to_array().iter().enumerate().all(|(k, &v)| {
            if k == Self::SUBJECTIVITY_INDEX {
                (0.0..=1.0).contains(&v)
            } else {
                v >= 0.0 && v.fract() == 0.0
            }
        })
    }
}

/// Lowercased maximal runs of letters, digits and apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn count_exact<S: AsRef<str>>(tokens: &[S], word: &str) -> usize {
    tokens.iter().filter(|t| t.as_ref() == word).count()
}

pub fn sentiment_counts<S: AsRef<str>>(tokens: &[S], lexicon: &PolarityLexicon) -> (usize, usize, usize) {
    let (mut pos, mut neg, mut neu) = (0, 0, 0);
    for p in tokens.iter().filter_map(|t| lexicon.polarity(t.as_ref())) {
        if p > SENTIMENT_THRESHOLD {
            pos += 1;
        } else if p < -SENTIMENT_THRESHOLD {
            neg += 1;
        } else {
            neu += 1;
        }
    }
    (pos, neg, neu)
}

pub fn aux_verb_counts<S: AsRef<str>>(tokens: &[S]) -> (usize, usize, usize, usize) {
    (
        count_exact(tokens, "is"),
        count_exact(tokens, "was"),
        count_exact(tokens, "are"),
        count_exact(tokens, "were"),
    )
}

/// Share of lexicon-covered tokens whose polarity magnitude exceeds the
/// sentiment threshold; 0 when nothing is covered.
pub fn subjectivity<S: AsRef<str>>(tokens: &[S], lexicon: &PolarityLexicon) -> f64 {
    let (pos, neg, neu) = sentiment_counts(tokens, lexicon);
    let covered = pos + neg + neu;
    if covered == 0 {
        0.0
    } else {
        (pos + neg) as f64 / covered as f64
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

pub fn syllable_estimate(token: &str) -> usize {
    let chars: Vec<char> = token.chars().flat_map(char::to_lowercase).collect();
    if !chars.iter().any(|c| c.is_alphabetic()) {
        return 0;
    }
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chars.len();
    let silent_e = n >= 2 && chars[n - 1] == 'e' && chars[n - 2].is_alphabetic() && !is_vowel(chars[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

/// A token made of letters (apostrophes allowed) with at least one letter.
pub fn is_alphabetic_token(token: &str) -> bool {
    token.chars().any(char::is_alphabetic) && token.chars().all(|c| c.is_alphabetic() || c == '\'')
}

pub fn difficulty_counts<S: AsRef<str>>(tokens: &[S]) -> (usize, usize) {
    let mut difficult = 0;
    let mut easy = 0;
    for t in tokens.iter().map(AsRef::as_ref).filter(|t| is_alphabetic_token(t)) {
        if syllable_estimate(t) >= DIFFICULT_SYLLABLES {
            difficult += 1;
        } else {
            easy += 1;
        }
    }
    (difficult, easy)
}

/// Counts `?`, `!` and `.` in untokenized text.
pub fn punctuation_counts(text: &str) -> (usize, usize, usize) {
    text.chars().fold((0, 0, 0), |(q, e, p), c| match c {
        '?' => (q + 1, e, p),
        '!' => (q, e + 1, p),
        '.' => (q, e, p + 1),
        _ => (q, e, p),
    })
}

pub fn pronoun_counts<S: AsRef<str>>(tokens: &[S]) -> (usize, usize, usize, usize) {
    (
        count_exact(tokens, "they"),
        count_exact(tokens, "he"),
        count_exact(tokens, "she"),
        count_exact(tokens, "we"),
    )
}

pub fn verb_number_counts<S: AsRef<str>>(tokens: &[S]) -> (usize, usize) {
    let count = |set: &[&str]| tokens.iter().filter(|t| set.contains(&t.as_ref())).count();
    (count(&SINGULAR_VERBS), count(&PLURAL_VERBS))
}

/// Features of one preprocessed tweet.
pub fn extract_features(preprocessed_text: &str, lexicon: &PolarityLexicon) -> FeatureVector {
    let tokens = tokenize(preprocessed_text);
    features_from_parts(&tokens, preprocessed_text, lexicon)
}

fn features_from_parts<S: AsRef<str>>(tokens: &[S], text: &str, lexicon: &PolarityLexicon) -> FeatureVector {
    let (pos, neg, neu) = sentiment_counts(tokens, lexicon);
    let (is, was, are, were) = aux_verb_counts(tokens);
    let (difficult, easy) = difficulty_counts(tokens);
    let (question, exclaim, period) = punctuation_counts(text);
    let (they, he, she, we) = pronoun_counts(tokens);
    let (singular, plural) = verb_number_counts(tokens);
    let f = |n: usize| n as f64;
    FeatureVector {
        pos_count: f(pos),
        neg_count: f(neg),
        neu_count: f(neu),
        aux_is: f(is),
        aux_was: f(was),
        aux_are: f(are),
        aux_were: f(were),
        subjectivity: subjectivity(tokens, lexicon),
        difficult_count: f(difficult),
        easy_count: f(easy),
        question_count: f(question),
        exclaim_count: f(exclaim),
        period_count: f(period),
        pron_they: f(they),
        pron_he: f(he),
        pron_she: f(she),
        pron_we: f(we),
        verb_singular: f(singular),
        verb_plural: f(plural),
    }
}
