use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use offtarget_core::corpus::{self, parse_tsv, write_tsv};
use offtarget_core::encoder::{build_vocab, MAX_VOCAB, SEQ_LEN};
use offtarget_core::metrics::{report_from_files, write_predictions};
use offtarget_core::optimizer::{
    class_weights, predict, train_with_progress, write_history, ClassWeights, Sample, TrainConfig,
};
use offtarget_core::tensorcore::{read_model, write_model};
use offtarget_core::textprep::preprocess;
use offtarget_core::{Annotation, EmoticonTable, ModelConfig, ModelParams, PolarityLexicon, TextEncoder, Vocabulary};

use crate::config::RunConfig;

/// Reads a dataset TSV; a three-column header means it carries labels.
pub fn read_dataset(path: &Path) -> Result<(Vec<Annotation>, bool)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or("");
    let labeled = header.split('\t').count() == 3;
    let data = parse_tsv(text.as_bytes(), labeled).with_context(|| format!("parsing {}", path.display()))?;
    Ok((data, labeled))
}

fn read_labeled(path: &Path) -> Result<Vec<Annotation>> {
    let (data, labeled) = read_dataset(path)?;
    if !labeled {
        bail!("{} has no label column", path.display());
    }
    Ok(data)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn emoticon_table(path: Option<PathBuf>) -> Result<EmoticonTable> {
    match path {
        Some(p) => {
            let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
            EmoticonTable::from_reader(BufReader::new(f)).with_context(|| format!("loading {}", p.display()))
        }
        None => Ok(EmoticonTable::bundled()),
    }
}

fn lexicon(cfg: &RunConfig) -> Result<PolarityLexicon> {
    match cfg.opt_path("lexicon")? {
        Some(p) => {
            let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
            PolarityLexicon::from_reader(BufReader::new(f)).with_context(|| format!("loading {}", p.display()))
        }
        None => Ok(PolarityLexicon::bundled()),
    }
}

fn read_vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    let p = cfg.path("vocab")?;
    let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
    Vocabulary::read(BufReader::new(f)).with_context(|| format!("loading {}", p.display()))
}

fn output_file(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    Ok(cfg.path("output_dir")?.join(name))
}

/// Training and validation sets: either two files, or a seeded split of the
/// training file.
fn training_sets(cfg: &RunConfig) -> Result<(Vec<Annotation>, Vec<Annotation>)> {
    let train = read_labeled(&cfg.path("train_tsv")?)?;
    if let Some(val) = cfg.opt_path("val_tsv")? {
        return Ok((train, read_labeled(&val)?));
    }
    let (n_train, n_val) = (cfg.get("n_train")?, cfg.get("n_val")?);
    Ok(corpus::split(&train, n_train, n_val, cfg.get("seed")?)?)
}

pub fn preprocess_file(input: &Path, output: &Path, table: Option<PathBuf>) -> Result<usize> {
    let table = emoticon_table(table)?;
    let (mut data, labeled) = read_dataset(input)?;
    for a in &mut data {
        a.text = preprocess(&a.text, &table);
    }
    let mut w = create(output)?;
    write_tsv(&mut w, &data, labeled)?;
    w.flush()?;
    Ok(data.len())
}

pub fn vocab(cfg: &RunConfig) -> Result<()> {
    let table = emoticon_table(cfg.opt_path("emoticon_table")?)?;
    let (train, _) = training_sets(cfg)?;
    let texts: Vec<String> = train.iter().map(|a| preprocess(&a.text, &table)).collect();
    let vocab = build_vocab(&texts, cfg.get_or("max_vocab", MAX_VOCAB)?)?;
    let path = cfg.path("vocab")?;
    let mut w = create(&path)?;
    vocab.write(&mut w)?;
    w.flush()?;
    println!(
        "vocabulary: {} indices, {} words -> {}",
        vocab.size(),
        vocab.word_count(),
        path.display()
    );
    Ok(())
}

fn model_config(cfg: &RunConfig, vocab_size: usize) -> Result<ModelConfig> {
    let full = ModelConfig::full(vocab_size);
    let config = ModelConfig {
        vocab_size,
        embed_dim: cfg.get_or("embed_dim", full.embed_dim)?,
        hidden: [
            cfg.get_or("hidden1", full.hidden[0])?,
            cfg.get_or("hidden2", full.hidden[1])?,
            cfg.get_or("hidden3", full.hidden[2])?,
        ],
        dropout: cfg.get_or("dropout", full.dropout)?,
    };
    config.validate()?;
    Ok(config)
}

fn samples(encoder: &TextEncoder, data: &[Annotation]) -> Result<Vec<Sample>> {
    encoder
        .encode_all(data)
        .iter()
        .map(|e| Sample::try_from(e).map_err(Into::into))
        .collect()
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        max_epochs: cfg.get_or("max_epochs", defaults.max_epochs)?,
        batch_size: cfg.get_or("batch_size", defaults.batch_size)?,
        seed: cfg.get("seed")?,
    };
    train_cfg.validate()?;
    let model_path = cfg.path("model")?;
    let history_path = output_file(cfg, "history.csv")?;

    let (train_set, val_set) = training_sets(cfg)?;
    let vocab = read_vocab(cfg)?;
    let model_config = model_config(cfg, vocab.size())?;
    let encoder = TextEncoder::new(emoticon_table(cfg.opt_path("emoticon_table")?)?, lexicon(cfg)?, vocab);
    let weights = if cfg.get_or("class_weights", true)? {
        class_weights(&corpus::label_distribution(&train_set)?)?
    } else {
        ClassWeights::uniform()
    };
    let (train_samples, val_samples) = (samples(&encoder, &train_set)?, samples(&encoder, &val_set)?);

    let init = ModelParams::<f32>::init(model_config, train_cfg.seed)?;
    println!("{}", init.summary(SEQ_LEN));
    println!(
        "training on {} examples, validating on {}; class weights IND {:.4} GRP {:.4} OTH {:.4}",
        train_samples.len(),
        val_samples.len(),
        weights.as_array()[0],
        weights.as_array()[1],
        weights.as_array()[2]
    );
    let outcome = train_with_progress(&train_samples, &val_samples, init, &train_cfg, &weights, |r| {
        println!(
            "epoch {:>3}  train_loss {:.6}  val_loss {:.6}  val_acc {:.4}",
            r.epoch, r.train_loss, r.val_loss, r.val_acc
        );
    })?;
    if outcome.stopped_early {
        println!("stopped early after epoch {}", outcome.history.len());
    }
    println!("keeping epoch {}", outcome.best_epoch);

    let mut w = create(&model_path)?;
    write_model(&outcome.params, &mut w)?;
    w.flush()?;
    let mut w = create(&history_path)?;
    write_history(&outcome.history, &mut w)?;
    w.flush()?;
    println!("model -> {}", model_path.display());
    println!("history -> {}", history_path.display());
    Ok(())
}

fn predictions_path(cfg: &RunConfig) -> Result<PathBuf> {
    match cfg.opt_path("predictions")? {
        Some(p) => Ok(p),
        None => output_file(cfg, "predictions.csv"),
    }
}

pub fn predict_file(cfg: &RunConfig) -> Result<()> {
    let model_path = cfg.path("model")?;
    let f = File::open(&model_path).with_context(|| format!("opening {}", model_path.display()))?;
    let params: ModelParams<f32> =
        read_model(BufReader::new(f)).with_context(|| format!("loading {}", model_path.display()))?;
    let vocab = read_vocab(cfg)?;
    if vocab.size() > params.config.vocab_size {
        bail!(
            "vocabulary has {} indices but the model embeds only {}",
            vocab.size(),
            params.config.vocab_size
        );
    }
    let encoder = TextEncoder::new(emoticon_table(cfg.opt_path("emoticon_table")?)?, lexicon(cfg)?, vocab);
    let (data, _) = read_dataset(&cfg.path("test_tsv")?)?;
    let mut out = Vec::with_capacity(data.len());
    for e in encoder.encode_all(&data) {
        let (label, _) = predict(&params, &e.indices).with_context(|| format!("predicting {}", e.id))?;
        out.push((e.id, label));
    }
    let path = predictions_path(cfg)?;
    let mut w = create(&path)?;
    write_predictions(&out, &mut w)?;
    w.flush()?;
    println!("{} predictions -> {}", out.len(), path.display());
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let report = report_from_files(cfg.path("test_tsv")?, predictions_path(cfg)?)?;
    println!("{report}");
    if cfg.has("output_dir") {
        let path = output_file(cfg, "report.txt")?;
        let mut w = create(&path)?;
        writeln!(w, "{report}")?;
        w.flush()?;
    }
    Ok(())
}
