//! Cosine similarity over embeddings and unigram-overlap ROUGE-1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_analysis::{Analyzer, RougePreprocess};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("degenerate embedding: vector has zero norm")]
    DegenerateEmbedding,
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
}

/// A dense, finite embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::InvalidEmbedding("empty vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::InvalidEmbedding(format!(
                "non-finite value at index {i}"
            )));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, MetricError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = MetricError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

/// `a . b / (|a| |b|)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricError> {
    if a.dimension() != b.dimension() {
        return Err(MetricError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::DegenerateEmbedding);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    #[serde(rename = "r")]
    pub recall: f64,
    #[serde(rename = "p")]
    pub precision: f64,
    pub f1: f64,
}

impl RougeScores {
    /// Build scores from overlap and the two denominators. A zero
    /// denominator yields 0 for the affected component.
    pub fn from_counts(overlap: usize, reference_total: usize, candidate_total: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let recall = ratio(overlap, reference_total);
        let precision = ratio(overlap, candidate_total);
        let f1 = if recall + precision > 0.0 {
            2.0 * recall * precision / (recall + precision)
        } else {
            0.0
        };
        RougeScores {
            recall,
            precision,
            f1,
        }
    }
}

/// Which ROUGE-1 counting rule to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeVariant {
    /// Overlap of unigram sets.
    #[default]
    Set,
    /// Clipped multiset counts, as in the original ROUGE package.
    Clipped,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RougeConfig {
    pub variant: RougeVariant,
    pub preprocess: RougePreprocess,
}

/// Set-based ROUGE-1 of `candidate` against `reference` on lowercased tokens.
pub fn rouge1(reference: &str, candidate: &str) -> RougeScores {
    rouge1_with(
        &Analyzer::default(),
        RougeConfig::default(),
        reference,
        candidate,
    )
}

pub fn rouge1_with(
    analyzer: &Analyzer<'_>,
    config: RougeConfig,
    reference: &str,
    candidate: &str,
) -> RougeScores {
    let reference = analyzer.unigram_counts(reference, config.preprocess);
    let candidate = analyzer.unigram_counts(candidate, config.preprocess);
    match config.variant {
        RougeVariant::Set => {
            let overlap = reference
                .keys()
                .filter(|k| candidate.contains_key(*k))
                .count();
            RougeScores::from_counts(overlap, reference.len(), candidate.len())
        }
        RougeVariant::Clipped => {
            let overlap = reference
                .iter()
                .map(|(k, n)| candidate.get(k).map_or(0, |m| (*n).min(*m)))
                .sum();
            RougeScores::from_counts(overlap, reference.values().sum(), candidate.values().sum())
        }
    }
}
