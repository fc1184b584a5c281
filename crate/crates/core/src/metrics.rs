//! Binary-classification evaluation: confusion counts, precision, recall,
//! F1, accuracy and wall-clock timing.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default decision threshold; a probability equal to it counts as positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Tallies thresholded predictions (`prob >= threshold` is positive).
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    if probs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// A metric value; `undefined` is set when its denominator was zero, in
/// which case `value` is 0.0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub value: f64,
    pub undefined: bool,
}

fn ratio(num: usize, den: usize) -> Score {
    if den == 0 {
        Score {
            value: 0.0,
            undefined: true,
        }
    } else {
        Score {
            value: num as f64 / den as f64,
            undefined: false,
        }
    }
}

pub fn precision(c: &ConfusionCounts) -> Score {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> Score {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn accuracy(c: &ConfusionCounts) -> Score {
    ratio(c.tp + c.tn, c.total())
}

/// Harmonic mean of precision and recall.
pub fn f1(precision: f64, recall: f64) -> Score {
    let den = precision + recall;
    if den == 0.0 {
        Score {
            value: 0.0,
            undefined: true,
        }
    } else {
        Score {
            value: 2.0 * precision * recall / den,
            undefined: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Accuracy,
    Precision,
    Recall,
    F1,
}

/// The four positive-class metrics plus execution time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(rename = "exec_time_seconds", with = "duration_seconds")]
    pub exec_time: Duration,
    #[serde(rename = "undefined_flags")]
    pub undefined: BTreeSet<MetricName>,
}

impl MetricsReport {
    pub fn from_counts(c: &ConfusionCounts, exec_time: Duration) -> Self {
        let mut undefined = BTreeSet::new();
        let mut take = |name, s: Score| {
            if s.undefined {
                undefined.insert(name);
            }
            s.value
        };
        let acc = take(MetricName::Accuracy, accuracy(c));
        let p = take(MetricName::Precision, precision(c));
        let r = take(MetricName::Recall, recall(c));
        let f = take(MetricName::F1, f1(p, r));
        MetricsReport {
            accuracy: acc,
            precision: p,
            recall: r,
            f1: f,
            exec_time,
            undefined,
        }
    }

    pub fn evaluate(probs: &[f64], labels: &[u8], exec_time: Duration) -> Result<Self> {
        let c = confusion(probs, labels, DEFAULT_THRESHOLD)?;
        Ok(Self::from_counts(&c, exec_time))
    }
}

mod duration_seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Runs `op` and measures its wall-clock duration.
pub fn timed<T>(op: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = op();
    (out, start.elapsed())
}

/// Duration in the `2h 5min` / `42min 8s` / `59s` style: the two leading
/// units, with zero-valued units dropped. Sub-second durations print as
/// milliseconds.
pub fn format_duration(d: Duration) -> String {
    let total = d.as_secs();
    if total == 0 {
        return format!("{}ms", d.as_millis());
    }
    let (h, m, s) = (total / 3600, (total % 3600) / 60, total % 60);
    let parts: Vec<String> = if h > 0 {
        [(h, "h"), (m, "min")]
            .iter()
            .filter(|(v, _)| *v > 0)
            .map(|(v, u)| format!("{v}{u}"))
            .collect()
    } else if m > 0 {
        [(m, "min"), (s, "s")]
            .iter()
            .filter(|(v, _)| *v > 0)
            .map(|(v, u)| format!("{v}{u}"))
            .collect()
    } else {
        vec![format!("{s}s")]
    };
    parts.join(" ")
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} ({})",
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            format_duration(self.exec_time)
        )
    }
}
