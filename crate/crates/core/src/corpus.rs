//! Labeled function ingestion, deterministic splitting and token statistics.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexer::{ranked_counts, tokenize, TokenizerConfig};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Safe = 0,
    Vulnerable = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Safe => Label::Vulnerable,
            Label::Vulnerable => Label::Safe,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Label> {
        match v {
            0 => Ok(Label::Safe),
            1 => Ok(Label::Vulnerable),
            other => Err(Error::value(format!("label {other} is not 0 or 1"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// One function body and its vulnerability label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledFunction {
    pub source: String,
    pub label: Label,
}

impl LabeledFunction {
    pub fn new(source: impl Into<String>, label: Label) -> Result<Self> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(Error::value("function source is empty"));
        }
        Ok(LabeledFunction { source, label })
    }
}

pub fn labels_of(data: &[LabeledFunction]) -> Vec<u8> {
    data.iter().map(|f| f.label.as_u8()).collect()
}

/// Reads a `text,label` CSV.
pub fn load_csv(path: &Path) -> Result<Vec<LabeledFunction>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Value(m) => Error::Value(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_csv(reader: impl Read) -> Result<Vec<LabeledFunction>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    let mut text_col = None;
    let mut label_col = None;
    for (i, h) in headers.iter().enumerate() {
        match h {
            "text" if text_col.is_none() => text_col = Some(i),
            "label" if label_col.is_none() => label_col = Some(i),
            other => {
                return Err(Error::Format(format!(
                    "unexpected header column {other:?}; expected `text,label`"
                )))
            }
        }
    }
    let (Some(text_col), Some(label_col)) = (text_col, label_col) else {
        return Err(Error::Format("header must name columns `text` and `label`".into()));
    };

    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        let text = record.get(text_col).unwrap_or_default();
        let label = match record.get(label_col).unwrap_or_default() {
            "0" => Label::Safe,
            "1" => Label::Vulnerable,
            other => {
                return Err(Error::value(format!(
                    "row {row}: label {other:?} is not 0 or 1"
                )))
            }
        };
        let f = LabeledFunction::new(text, label)
            .map_err(|_| Error::value(format!("row {row}: empty function source")))?;
        out.push(f);
    }
    Ok(out)
}

pub fn write_csv(path: &Path, data: &[LabeledFunction]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, data).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_csv_to(writer: impl Write, data: &[LabeledFunction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fail = |e: csv::Error| Error::Format(format!("csv write failed: {e}"));
    w.write_record(["text", "label"]).map_err(fail)?;
    for f in data {
        w.write_record([f.source.as_str(), if f.label == Label::Safe { "0" } else { "1" }])
            .map_err(fail)?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::value(format!("split ratios must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::value(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledFunction>,
    pub validation: Vec<LabeledFunction>,
    pub test: Vec<LabeledFunction>,
    pub seed: u64,
}

/// Seeded Fisher-Yates shuffle followed by a contiguous partition. Train and
/// validation sizes are floored; test takes the remainder.
pub fn split_dataset(data: &[LabeledFunction], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    if data.is_empty() {
        return Err(Error::value("cannot split an empty dataset"));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));

    // The epsilon keeps e.g. 100 * 0.29 = 28.999999999999996 from flooring to 28.
    let n_train = ((n as f64 * ratios.train) + 1e-9).floor() as usize;
    let n_val = (((n as f64 * ratios.validation) + 1e-9).floor() as usize).min(n - n_train);
    let take = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: take(&order[..n_train]),
        validation: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
        seed,
    })
}

/// Token frequencies across a corpus, most frequent first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub counts: Vec<(String, u64)>,
}

impl CorpusStats {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|(_, c)| c).sum()
    }

    pub fn top(&self, k: usize) -> &[(String, u64)] {
        &self.counts[..k.min(self.counts.len())]
    }

    /// Two-column `token,count` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let fail = |e: csv::Error| Error::Format(format!("csv write failed: {e}"));
        w.write_record(["token", "count"]).map_err(fail)?;
        for (t, c) in &self.counts {
            w.write_record([t.as_str(), &c.to_string()]).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn corpus_stats(data: &[LabeledFunction], config: &TokenizerConfig) -> CorpusStats {
    let seqs: Vec<_> = data.iter().map(|f| tokenize(&f.source, config)).collect();
    CorpusStats {
        counts: ranked_counts(&seqs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lf(s: &str, l: Label) -> LabeledFunction {
        LabeledFunction::new(s, l).unwrap()
    }

    #[test]
    fn reads_two_rows() {
        let data = read_csv("text,label\n\"int f(){}\",0\n\"void g(){}\",1\n".as_bytes()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0].source, "int f(){}");
        assert_eq!(labels_of(&data), vec![0, 1]);
    }

    #[test]
    fn quoted_comma_is_preserved() {
        let data = read_csv("text,label\n\"a,b\",1\n".as_bytes()).unwrap();
        assert_eq!(data[0].source, "a,b");
    }

    #[test]
    fn embedded_newline_and_quote() {
        let data = read_csv("text,label\n\"x = \"\"s\"\";\ny\",0\n".as_bytes()).unwrap();
        assert_eq!(data[0].source, "x = \"s\";\ny");
    }

    #[test]
    fn bad_label_names_the_row() {
        let err = read_csv("text,label\nok,0\nbad,2\n".as_bytes()).unwrap_err();
        match err {
            Error::Value(m) => assert!(m.contains("row 2"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_is_checked() {
        assert!(matches!(
            read_csv("code,label\nx,0\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_csv("text,label,extra\nx,0,1\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(read_csv("text\nx\n".as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn split_sizes_and_errors() {
        let data: Vec<_> = (0..10).map(|i| lf(&format!("f{i}"), Label::Safe)).collect();
        let s = split_dataset(&data, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        assert!(SplitRatios::new(0.5, 0.5, 0.5).is_err());
        assert!(split_dataset(&[], SplitRatios::default(), 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let data: Vec<_> = (0..100).map(|i| lf(&format!("f{i}"), Label::Safe)).collect();
        let a = split_dataset(&data, SplitRatios::default(), 7).unwrap();
        let b = split_dataset(&data, SplitRatios::default(), 7).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&data, SplitRatios::default(), 8).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn stats_examples() {
        let data = vec![lf("a = b", Label::Safe), lf("a = c", Label::Vulnerable)];
        let s = corpus_stats(&data, &TokenizerConfig::default());
        let expected: Vec<(String, u64)> = [("=", 2), ("a", 2), ("b", 1), ("c", 1)]
            .iter()
            .map(|(t, c)| (t.to_string(), *c))
            .collect();
        assert_eq!(s.counts, expected);
        assert!(corpus_stats(&[], &TokenizerConfig::default()).counts.is_empty());
    }
}
