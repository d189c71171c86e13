#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn offtarget(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offtarget"))
        .args(args)
        .output()
        .expect("spawn offtarget")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Thirty tweets, ten per class, each built from its class's own words plus
/// a shared filler word.
pub fn synthetic_tsv() -> String {
    let words = [
        [
            "you", "your", "yourself", "him", "her", "she", "he", "dude", "guy", "man",
        ],
        [
            "they", "them", "those", "people", "group", "party", "country", "nation", "team", "voters",
        ],
        [
            "this", "that", "thing", "show", "movie", "game", "weather", "song", "phone", "app",
        ],
    ];
    let labels = ["IND", "GRP", "OTH"];
    let mut out = String::from("id\ttweet\tlabel\n");
    for (c, (ws, label)) in words.iter().zip(labels).enumerate() {
        for i in 0..10 {
            let tweet: Vec<&str> = (0..5).map(|j| ws[(i * 3 + j * 7) % 10]).chain(["stuff"]).collect();
            out.push_str(&format!("{}{:02}\t{}\t{label}\n", c, i, tweet.join(" ")));
        }
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, contents).unwrap();
    p
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Enough distinct words to fill a 50,000-entry vocabulary, spread over
/// sixteen labeled rows, any twelve of which suffice.
pub fn wide_vocab_tsv() -> String {
    let labels = ["IND", "GRP", "OTH"];
    let mut out = String::from("id\ttweet\tlabel\n");
    let per_row = 4200;
    for row in 0..16 {
        let words: Vec<String> = (0..per_row).map(|k| format!("w{}", row * per_row + k)).collect();
        out.push_str(&format!("r{row}\tyou {}\t{}\n", words.join(" "), labels[row % 3]));
    }
    out
}

pub fn full_config(dir: &Path, max_epochs: usize) -> PathBuf {
    write(dir, "wide.tsv", &wide_vocab_tsv());
    write(
        dir,
        "full.cfg",
        &format!(
            "train_tsv = wide.tsv\n\
             n_train = 12\n\
             n_val = 4\n\
             vocab = out/vocab.txt\n\
             model = out/model.offt\n\
             output_dir = out\n\
             max_epochs = {max_epochs}\n\
             seed = 11\n"
        ),
    )
}
