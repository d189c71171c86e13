//! Confusion matrix, per-class and macro precision/recall/F1, accuracy and
//! Cohen's kappa.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::corpus::{parse_tsv, Label};
use crate::error::{Error, Result};

/// Rows are gold labels, columns predictions, both in `IND, GRP, OTH` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub matrix: ConfusionMatrix,
    /// Indexed by [`Label::index`].
    pub per_class: [ClassScores; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub kappa: f64,
}

impl EvaluationReport {
    pub fn class(&self, label: Label) -> &ClassScores {
        &self.per_class[label.index()]
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Unweighted mean over the three classes.
pub fn macro_average(values: [f64; 3]) -> f64 {
    values.iter().sum::<f64>() / 3.0
}

/// Empty denominators give 0 for precision, recall and F1, and kappa is 0
/// when chance agreement is 1.
pub fn report(cm: &ConfusionMatrix) -> Result<EvaluationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let per_class = [0, 1, 2].map(|c| {
        let precision = ratio(cm.counts[c][c], cm.col_sum(c));
        let recall = ratio(cm.counts[c][c], cm.row_sum(c));
        ClassScores {
            precision,
            recall,
            f1: f1_score(precision, recall),
            support: cm.row_sum(c),
        }
    });
    let accuracy = ratio(cm.trace(), total);
    let n2 = (total as f64) * (total as f64);
    let chance: f64 = (0..3).map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64).sum::<f64>() / n2;
    let kappa = if chance == 1.0 {
        0.0
    } else {
        (accuracy - chance) / (1.0 - chance)
    };
    Ok(EvaluationReport {
        matrix: *cm,
        macro_precision: macro_average(per_class.map(|s| s.precision)),
        macro_recall: macro_average(per_class.map(|s| s.recall)),
        macro_f1: macro_average(per_class.map(|s| s.f1)),
        per_class,
        accuracy,
        kappa,
    })
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12}{:>10}{:>10}{:>10}{:>10}",
            "Class", "Precision", "Recall", "F1-score", "support"
        )?;
        // alphabetical rows, as in the usual classification report
        for label in [Label::Grp, Label::Ind, Label::Oth] {
            let s = self.class(label);
            writeln!(
                f,
                "{:<12}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                label.as_str(),
                s.precision,
                s.recall,
                s.f1,
                s.support
            )?;
        }
        writeln!(
            f,
            "{:<12}{:>10.2}{:>10.2}{:>10.4}{:>10}",
            "macro avg",
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.matrix.total()
        )?;
        writeln!(
            f,
            "{:<12}{:>30.4}{:>10}",
            "accuracy",
            self.accuracy,
            self.matrix.total()
        )?;
        writeln!(f)?;
        writeln!(f, "Confusion matrix (rows = gold, columns = predicted)")?;
        write!(f, "{:>8}", "")?;
        for label in Label::ALL {
            write!(f, "{:>8}", label.as_str())?;
        }
        writeln!(f)?;
        for g in Label::ALL {
            write!(f, "{:>8}", g.as_str())?;
            for p in Label::ALL {
                write!(f, "{:>8}", self.matrix.counts[g.index()][p.index()])?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        write!(f, "Cohen's kappa: {:.4}", self.kappa)
    }
}

/// `(id, label)` pairs from either a labeled dataset TSV or a prediction CSV
/// (`id,label`). The header line decides: a tab means TSV.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, Label)>> {
    let mut reader = BufReader::new(reader);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    if header.contains('\t') {
        let rest = header.as_bytes().chain(reader);
        return parse_tsv(BufReader::new(rest), true)?
            .into_iter()
            .map(|a| Ok((a.id, a.label.expect("labeled parse"))))
            .collect();
    }
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(header.as_bytes().chain(reader));
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, record) in csv.records().enumerate() {
        let record = record?;
        let line = n + 2;
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                expected: 2,
                found: record.len(),
            });
        }
        let id = record[0].to_string();
        let label = record[1].parse().map_err(|token| Error::UnknownLabel { line, token })?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { line, id });
        }
        out.push((id, label));
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(predictions: &[(String, Label)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["id", "label"])?;
    for (id, label) in predictions {
        out.write_record([id.as_str(), label.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

/// Joins gold and predicted labels on id, in gold order.
pub fn join_on_id(gold: &[(String, Label)], pred: &[(String, Label)]) -> Result<(Vec<Label>, Vec<Label>)> {
    let by_id: HashMap<&str, Label> = pred.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let gold_ids: HashSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    let mut unmatched: Vec<String> = gold
        .iter()
        .filter(|(id, _)| !by_id.contains_key(id.as_str()))
        .map(|(id, _)| format!("gold:{id}"))
        .collect();
    unmatched.extend(
        pred.iter()
            .filter(|(id, _)| !gold_ids.contains(id.as_str()))
            .map(|(id, _)| format!("pred:{id}")),
    );
    if !unmatched.is_empty() {
        unmatched.truncate(10);
        return Err(Error::UnmatchedIds(unmatched));
    }
    Ok(gold.iter().map(|(id, g)| (*g, by_id[id.as_str()])).unzip())
}

pub fn report_from_files(gold_path: impl AsRef<Path>, pred_path: impl AsRef<Path>) -> Result<EvaluationReport> {
    let gold = read_labels(File::open(gold_path)?)?;
    let pred = read_labels(File::open(pred_path)?)?;
    let (g, p) = join_on_id(&gold, &pred)?;
    report(&confusion(&g, &p)?)
}
