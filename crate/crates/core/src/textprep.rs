//! Tweet normalization: emoticons, mentions, `XX`/`XXX` markers, URLs and
//! whitespace.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

const BUNDLED_EMOTICONS: &str = include_str!("../assets/emoticons.tsv");

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static SEXUAL_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bx{2,3}\b").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap());

/// Ordered emoticon → meaning pairs with longest-match lookup.
///
/// Loading enforces: unique patterns, patterns without whitespace and with at
/// least one non-alphanumeric character, and replacements made only of
/// letters and spaces. The last rule means no replacement can contain a
/// pattern, so replacement output never matches again.
#[derive(Debug, Clone)]
pub struct EmoticonTable {
    entries: Vec<(String, String)>,
    // first char -> indices into `entries`, longest pattern first
    by_first: HashMap<char, Vec<usize>>,
}

impl EmoticonTable {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (pattern, replacement) in &entries {
            if pattern.is_empty() || pattern.chars().any(char::is_whitespace) {
                return Err(Error::EmoticonTable(format!(
                    "pattern {pattern:?} is empty or contains whitespace"
                )));
            }
            if pattern.chars().all(char::is_alphanumeric) {
                return Err(Error::EmoticonTable(format!(
                    "pattern {pattern:?} has no symbol character"
                )));
            }
            if !seen.insert(pattern.as_str()) {
                return Err(Error::EmoticonTable(format!("duplicate pattern {pattern:?}")));
            }
            if replacement.trim().is_empty() || !replacement.chars().all(|c| c.is_alphabetic() || c == ' ') {
                return Err(Error::EmoticonTable(format!(
                    "replacement {replacement:?} for {pattern:?} must be letters and spaces"
                )));
            }
        }
        for (_, replacement) in &entries {
            if let Some((p, _)) = entries.iter().find(|(p, _)| replacement.contains(p.as_str())) {
                return Err(Error::EmoticonTable(format!(
                    "replacement {replacement:?} contains pattern {p:?}"
                )));
            }
        }

        let mut by_first: HashMap<char, Vec<usize>> = HashMap::new();
        for (i, (pattern, _)) in entries.iter().enumerate() {
            let first = pattern.chars().next().unwrap();
            by_first.entry(first).or_default().push(i);
        }
        for candidates in by_first.values_mut() {
            candidates.sort_by_key(|&i| std::cmp::Reverse(entries[i].0.len()));
        }
        Ok(Self { entries, by_first })
    }

    /// Parses `pattern<TAB>replacement` lines; `#` lines and blank lines are
    /// skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (pattern, replacement) = line
                .split_once('\t')
                .ok_or_else(|| Error::EmoticonTable(format!("line {}: expected pattern<TAB>replacement", n + 1)))?;
            entries.push((pattern.to_string(), replacement.to_string()));
        }
        Self::new(entries)
    }

    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_EMOTICONS.as_bytes()).expect("bundled emoticon table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, pattern: &str) -> Option<&str> {
        self.entries.iter().find(|(p, _)| p == pattern).map(|(_, r)| r.as_str())
    }

    fn longest_match(&self, rest: &str) -> Option<&(String, String)> {
        let first = rest.chars().next()?;
        self.by_first
            .get(&first)?
            .iter()
            .map(|&i| &self.entries[i])
            .find(|(p, _)| rest.starts_with(p.as_str()))
    }
}

/// Left-to-right scan replacing the longest pattern at each position with
/// ` meaning `.
pub fn replace_emoticons(text: &str, table: &EmoticonTable) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        if let Some((pattern, replacement)) = table.longest_match(rest) {
            out.push(' ');
            out.push_str(replacement);
            out.push(' ');
            pos += pattern.len();
        } else {
            let c = rest.chars().next().unwrap();
            out.push(c);
            pos += c.len_utf8();
        }
    }
    out
}

pub fn remove_mentions(text: &str) -> String {
    MENTION.replace_all(text, "").into_owned()
}

pub fn replace_sexual_markers(text: &str) -> String {
    SEXUAL_MARKER.replace_all(text, "sexual").into_owned()
}

pub fn remove_urls(text: &str) -> String {
    URL.replace_all(text, "").into_owned()
}

pub fn contract_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn single_pass(text: &str, table: &EmoticonTable) -> String {
    let text = replace_emoticons(text, table);
    let text = remove_mentions(&text);
    let text = replace_sexual_markers(&text);
    let text = remove_urls(&text);
    contract_whitespace(&text)
}

/// Runs emoticons → mentions → markers → URLs → whitespace, repeating the
/// pass until the text stops changing.
///
/// One pass is enough for ordinary tweets. Deletions can splice new matches
/// together (`:@ab)` becomes `:)` once the mention is gone), so the pass is
/// repeated to reach a fixed point. Every repeat removes at least one symbol
/// character, which bounds the loop.
pub fn preprocess(text: &str, table: &EmoticonTable) -> String {
    let mut current = single_pass(text, table);
    loop {
        let next = single_pass(&current, table);
        if next == current {
            return current;
        }
        current = next;
    }
}
