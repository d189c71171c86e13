//! Dataset ingestion: TSV parsing and writing, seeded splits, label counts.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng;

/// Target of an offensive tweet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Targets an individual.
    Ind,
    /// Targets a group.
    Grp,
    /// Targets neither an individual nor a group.
    Oth,
}

impl Label {
    /// Canonical class order. Also the tie-break order for argmax.
    pub const ALL: [Label; 3] = [Label::Ind, Label::Grp, Label::Oth];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ind => "IND",
            Label::Grp => "GRP",
            Label::Oth => "OTH",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IND" => Ok(Label::Ind),
            "GRP" => Ok(Label::Grp),
            "OTH" => Ok(Label::Oth),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Annotation {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub ind: usize,
    pub grp: usize,
    pub oth: usize,
}

impl LabelCounts {
    pub fn new(ind: usize, grp: usize, oth: usize) -> Self {
        Self { ind, grp, oth }
    }

    pub fn total(&self) -> usize {
        self.ind + self.grp + self.oth
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Ind => self.ind,
            Label::Grp => self.grp,
            Label::Oth => self.oth,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::Ind => self.ind += 1,
            Label::Grp => self.grp += 1,
            Label::Oth => self.oth += 1,
        }
    }
}

/// Reads `id<TAB>tweet[<TAB>label]` rows after a header line.
///
/// Line numbers in errors are 1-based and count the header. Blank lines are
/// skipped. Escape sequences such as a literal `\n` are kept as text.
pub fn parse_tsv<R: BufRead>(mut reader: R, labeled: bool) -> Result<Vec<Annotation>> {
    let expected = if labeled { 3 } else { 2 };
    let mut buf = String::new();
    if reader.read_line(&mut buf)? == 0 {
        return Err(Error::MissingHeader);
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut line_no = 1;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = buf.strip_suffix('\n').unwrap_or(&buf);
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != expected {
            return Err(Error::MalformedRow {
                line: line_no,
                expected,
                found: cols.len(),
            });
        }
        let id = cols[0];
        if id.is_empty() {
            return Err(Error::EmptyId { line: line_no });
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: id.to_string(),
            });
        }
        let label = if labeled {
            let label = cols[2]
                .parse()
                .map_err(|token| Error::UnknownLabel { line: line_no, token })?;
            Some(label)
        } else {
            None
        };
        out.push(Annotation::new(id, cols[1], label));
    }
    Ok(out)
}

/// Writes the layout read by [`parse_tsv`]. With `labeled` set, every
/// annotation must carry a label.
pub fn write_tsv<W: Write>(mut writer: W, data: &[Annotation], labeled: bool) -> Result<()> {
    if labeled {
        writeln!(writer, "id\ttweet\tlabel")?;
    } else {
        writeln!(writer, "id\ttweet")?;
    }
    for a in data {
        if labeled {
            let label = a.label.ok_or_else(|| Error::Unlabeled { id: a.id.clone() })?;
            writeln!(writer, "{}\t{}\t{}", a.id, a.text, label)?;
        } else {
            writeln!(writer, "{}\t{}", a.id, a.text)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Seeded shuffle, then the first `n_train` rows become the training set and
/// the next `n_val` rows the validation set.
pub fn split(
    data: &[Annotation],
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<(Vec<Annotation>, Vec<Annotation>)> {
    let required = n_train + n_val;
    if required > data.len() {
        return Err(Error::InsufficientData {
            required,
            available: data.len(),
        });
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng::shuffle(&mut order, &mut rng::seeded(seed));
    let pick = |range: &[usize]| range.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..required])))
}

pub fn label_distribution(data: &[Annotation]) -> Result<LabelCounts> {
    let mut counts = LabelCounts::default();
    for a in data {
        let label = a.label.ok_or_else(|| Error::Unlabeled { id: a.id.clone() })?;
        counts.bump(label);
    }
    Ok(counts)
}
