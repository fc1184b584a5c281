//! Result tables: one row per base model plus the ensemble, in the column
//! order `Models | Accuracy | Precision | Recall | F1 Score | Execution Time`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{format_duration, MetricName, MetricsReport};
use crate::models::{Architecture, EmbeddingMode};

pub const REPORT_COLUMNS: [&str; 6] = ["Models", "Accuracy", "Precision", "Recall", "F1 Score", "Execution Time"];
pub const ENSEMBLE_ROW: &str = "Proposed Model";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub metrics: MetricsReport,
}

/// Metrics of one experiment arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `minimal` or `glove+fasttext`.
    pub embedding: String,
    pub rows: Vec<ReportRow>,
}

fn cell(m: &MetricsReport, name: MetricName, value: f64) -> String {
    if m.undefined.contains(&name) {
        "n/a".to_string()
    } else {
        format!("{value:.2}")
    }
}

impl RunReport {
    /// Base-model rows in the given order, then the ensemble row if present.
    pub fn new(mode: EmbeddingMode, base: &[(Architecture, MetricsReport)], ensemble: Option<&MetricsReport>) -> Self {
        let mut rows: Vec<ReportRow> = base
            .iter()
            .map(|(a, m)| ReportRow {
                model: a.display_name().to_string(),
                metrics: m.clone(),
            })
            .collect();
        if let Some(m) = ensemble {
            rows.push(ReportRow {
                model: ENSEMBLE_ROW.to_string(),
                metrics: m.clone(),
            });
        }
        RunReport {
            embedding: mode.tag().to_string(),
            rows,
        }
    }

    pub fn model_names(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.model.as_str()).collect()
    }

    /// GitHub-flavoured markdown table, metrics to two decimals.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.model,
                cell(m, MetricName::Accuracy, m.accuracy),
                cell(m, MetricName::Precision, m.precision),
                cell(m, MetricName::Recall, m.recall),
                cell(m, MetricName::F1, m.f1),
                format_duration(m.exec_time)
            );
        }
        out
    }

    /// Heading naming the embedding arm, then the table.
    pub fn to_markdown_section(&self) -> String {
        format!("### Embedding: {}\n\n{}", self.embedding, self.to_markdown())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Sections for several arms separated by blank lines.
pub fn render_reports(reports: &[RunReport]) -> String {
    reports
        .iter()
        .map(RunReport::to_markdown_section)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::time::Duration;

    use super::*;

    fn metrics(acc: f64, secs: u64) -> MetricsReport {
        MetricsReport {
            accuracy: acc,
            precision: 0.5,
            recall: 0.25,
            f1: 1.0 / 3.0,
            exec_time: Duration::from_secs(secs),
            undefined: BTreeSet::new(),
        }
    }

    #[test]
    fn header_and_rows() {
        let r = RunReport::new(
            EmbeddingMode::TrainableMinimal,
            &[(Architecture::Lstm, metrics(0.9, 2528))],
            Some(&metrics(0.94, 7530)),
        );
        let md = r.to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Models | Accuracy | Precision | Recall | F1 Score | Execution Time |");
        assert_eq!(lines[2], "| LSTM | 0.90 | 0.50 | 0.25 | 0.33 | 42min 8s |");
        assert_eq!(lines[3], "| Proposed Model | 0.94 | 0.50 | 0.25 | 0.33 | 2h 5min |");
        assert_eq!(r.model_names(), ["LSTM", "Proposed Model"]);
    }

    #[test]
    fn undefined_metric_prints_na() {
        let mut m = metrics(0.5, 1);
        m.undefined.insert(MetricName::Precision);
        let r = RunReport::new(EmbeddingMode::StackedGloveFasttext, &[(Architecture::Bilstm, m)], None);
        assert!(r.to_markdown().contains("| BiLSTM | 0.50 | n/a |"));
        assert!(r.to_markdown_section().starts_with("### Embedding: glove+fasttext"));
    }
}
