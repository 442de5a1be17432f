//! Corpus-level means and their renderings.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{DocumentResult, MetricQuad, PipelineError};
use crate::strategies::Strategy;

pub const BASELINE_ROW: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row: String,
    pub n: usize,
    /// Absent when no document contributed.
    pub mean: Option<MetricQuad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n_documents: usize,
    pub failed_documents: usize,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

fn mean_row(row: String, quads: &[MetricQuad]) -> ReportRow {
    let mean = (!quads.is_empty()).then(|| {
        let mut sum = [0.0; 4];
        for q in quads {
            for (s, v) in sum.iter_mut().zip(q.values()) {
                *s += v;
            }
        }
        MetricQuad::from_values(sum.map(|s| s / quads.len() as f64))
    });
    ReportRow {
        row,
        n: quads.len(),
        mean,
    }
}

/// Average the baseline and every strategy over the documents where each
/// succeeded. Fails only when no document has a baseline.
pub fn aggregate(results: &[DocumentResult]) -> Result<Report, PipelineError> {
    let baseline: Vec<MetricQuad> = results.iter().filter_map(|r| r.baseline).collect();
    if baseline.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let mut per_strategy: BTreeMap<Strategy, Vec<MetricQuad>> = BTreeMap::new();
    for r in results {
        for (s, v) in &r.variants {
            let bucket = per_strategy.entry(*s).or_default();
            if let (true, Some(m)) = (v.status.is_ok(), v.metrics) {
                bucket.push(m);
            }
        }
    }
    let mut rows = vec![mean_row(BASELINE_ROW.to_string(), &baseline)];
    rows.extend(
        per_strategy
            .into_iter()
            .map(|(s, q)| mean_row(s.code().to_string(), &q)),
    );
    Ok(Report {
        n_documents: results.len(),
        failed_documents: results.iter().filter(|r| !r.status.is_ok()).count(),
        rows,
    })
}

fn cells(mean: Option<MetricQuad>, width: usize) -> String {
    match mean {
        Some(q) => q
            .values()
            .iter()
            .map(|v| format!("{v:<width$.4}"))
            .collect::<Vec<_>>()
            .join(""),
        None => format!("{:<width$}", "-").repeat(4),
    }
}

impl Report {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.row == name)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.to_text(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,n,doc_cosine,doc_rouge1,sum_cosine,sum_rouge1\n");
        for r in &self.rows {
            let values = match r.mean {
                Some(q) => q.values().map(|v| format!("{v:.4}")).join(","),
                None => ",,,".to_string(),
            };
            writeln!(out, "{},{},{}", r.row, r.n, values).unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        const W: usize = 12;
        let mut out = String::new();
        writeln!(
            out,
            "{:<14}{:<6}{:<24}{:<24}",
            "", "", "Full text", "Summaries"
        )
        .unwrap();
        writeln!(
            out,
            "{:<14}{:<6}{:<W$}{:<W$}{:<W$}{:<W$}",
            "", "n", "Cosine", "ROUGE-1", "Cosine", "ROUGE-1"
        )
        .unwrap();
        for (i, r) in self.rows.iter().enumerate() {
            if i == 0 {
                writeln!(out, "No insertion (original vs simplified)").unwrap();
            } else if i == 1 {
                writeln!(out, "Insertion approach (original vs augmented)").unwrap();
            }
            writeln!(
                out,
                "{:<14}{:<6}{}",
                r.row,
                r.n,
                cells(r.mean, W).trim_end()
            )
            .unwrap();
        }
        writeln!(
            out,
            "documents: {}, failed: {}",
            self.n_documents, self.failed_documents
        )
        .unwrap();
        out
    }
}
