//! Inputs shared by the benchmarks.

use offtarget_core::rng;

const WORDS: &[&str] = &[
    "you",
    "they",
    "are",
    "so",
    "stupid",
    "@USER",
    "lol",
    ":-)",
    ";-(",
    "XX",
    "http://t.co/x",
    "people",
    "this",
    "country",
    "is",
    "a",
    "joke",
    "he",
    "she",
    "never",
    "always",
    "!!",
    "?",
    "www.example.com",
    "them",
    "liars",
];

/// Deterministic tweet-like strings of 8 to 31 words.
pub fn tweets(n: usize, seed: u64) -> Vec<String> {
    let mut r = rng::seeded(seed);
    let mut pick = |k: usize| (rng::unit_f64(&mut r) * k as f64) as usize;
    (0..n)
        .map(|_| {
            let len = 8 + pick(24);
            (0..len).map(|_| WORDS[pick(WORDS.len())]).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

/// A random index sequence below `vocab`.
pub fn sequence(len: usize, vocab: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::seeded(seed);
    (0..len)
        .map(|_| (rng::unit_f64(&mut r) * vocab as f64) as usize)
        .collect()
}
