//! Per-document processing and corpus runs.
//!
//! One document goes through: simplify, detect missing information, then for
//! every enabled strategy build a payload, regenerate and score. Scores
//! compare each text (and its summary) with the original (and its summary).

mod io;
mod report;

use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    read_corpus, read_results, results_to_jsonl, write_results, CorpusError, RESULTS_SCHEMA_VERSION,
};
pub use report::{aggregate, Report, ReportFormat, ReportRow, BASELINE_ROW};

use crate::gap_detection::{build_missing_info, MissingInfo};
use crate::metrics::{
    cosine_similarity, rouge1_with, EmbeddingVector, MetricError, RougeConfig, RougeScores,
};
use crate::providers::{ChatClient, ProviderError, Providers};
use crate::strategies::{
    build_payload, prompts, regenerate, InsertionPayload, PayloadContext, Strategy, StrategyError,
};
use crate::text_analysis::{Analyzer, Stopwords};

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// A ready-made simplification; skips the simplification call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplified: Option<String>,
}

/// The four scores of one text against the original.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricQuad {
    pub doc_cosine: f64,
    pub doc_rouge1: f64,
    pub sum_cosine: f64,
    pub sum_rouge1: f64,
}

impl MetricQuad {
    pub fn values(&self) -> [f64; 4] {
        [
            self.doc_cosine,
            self.doc_rouge1,
            self.sum_cosine,
            self.sum_rouge1,
        ]
    }

    pub fn from_values(v: [f64; 4]) -> Self {
        MetricQuad {
            doc_cosine: v[0],
            doc_rouge1: v[1],
            sum_cosine: v[2],
            sum_rouge1: v[3],
        }
    }
}

/// Full scores, keeping recall and precision alongside F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub doc_cosine: f64,
    pub doc_rouge1: RougeScores,
    pub sum_cosine: f64,
    pub sum_rouge1: RougeScores,
}

impl PairScores {
    pub fn quad(&self) -> MetricQuad {
        MetricQuad {
            doc_cosine: self.doc_cosine,
            doc_rouge1: self.doc_rouge1.f1,
            sum_cosine: self.sum_cosine,
            sum_rouge1: self.sum_rouge1.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed { reason: String },
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }

    fn failed(reason: impl ToString) -> Self {
        Status::Failed {
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<InsertionPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricQuad>,
}

impl VariantResult {
    fn failed(
        reason: impl ToString,
        payload: Option<InsertionPayload>,
        augmented: Option<String>,
    ) -> Self {
        VariantResult {
            status: Status::failed(reason),
            augmented_text: augmented,
            payload,
            metrics: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub schema_version: u32,
    pub id: String,
    pub status: Status,
    pub original: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplified: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_info: Option<MissingInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<MetricQuad>,
    #[serde(default)]
    pub variants: BTreeMap<Strategy, VariantResult>,
}

impl DocumentResult {
    fn new(doc: &Document) -> Self {
        DocumentResult {
            schema_version: RESULTS_SCHEMA_VERSION,
            id: doc.id.clone(),
            status: Status::Ok,
            original: doc.text.clone(),
            simplified: None,
            missing_info: None,
            baseline: None,
            variants: BTreeMap::new(),
        }
    }

    /// True when the document and every variant succeeded.
    pub fn fully_succeeded(&self) -> bool {
        self.status.is_ok() && self.variants.values().all(|v| v.status.is_ok())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("simplification failed: {0}")]
    Simplify(ProviderError),
    #[error("missing-information detection failed: {0}")]
    Detection(ProviderError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("no document produced a baseline")]
    EmptyCorpus,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Strategies to run, in report order.
    pub strategies: Vec<Strategy>,
    /// Required when A4 or A5 is enabled.
    pub run_seed: Option<u64>,
    pub rouge: RougeConfig,
    pub simplify_template: String,
    /// Documents processed concurrently.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strategies: Strategy::ALL.to_vec(),
            run_seed: None,
            rouge: RougeConfig::default(),
            simplify_template: prompts::SIMPLIFY_TEMPLATE.to_string(),
            workers: 1,
        }
    }
}

/// The first-pass simplification, whitespace-trimmed.
pub fn simplify(
    chat: &ChatClient,
    template: &str,
    original: &str,
) -> Result<String, PipelineError> {
    if original.trim().is_empty() {
        return Err(PipelineError::Precondition(
            "original text must be non-empty".into(),
        ));
    }
    let prompt = prompts::simplification_prompt(template, original);
    chat.chat_complete(&prompt)
        .map(|s| s.trim().to_string())
        .map_err(PipelineError::Simplify)
}

/// The original text with its embedding and summary, computed once per
/// document and shared by every comparison.
#[derive(Debug, Clone)]
pub struct Reference {
    pub text: String,
    pub embedding: EmbeddingVector,
    pub summary: String,
    pub summary_embedding: EmbeddingVector,
}

/// Scores texts against a reference using the embedding and summarizer
/// handles.
pub struct Scorer<'a> {
    providers: &'a Providers,
    analyzer: Analyzer<'a>,
    rouge: RougeConfig,
}

impl<'a> Scorer<'a> {
    pub fn new(providers: &'a Providers, analyzer: Analyzer<'a>, rouge: RougeConfig) -> Self {
        Scorer {
            providers,
            analyzer,
            rouge,
        }
    }

    pub fn reference(&self, original: &str) -> Result<Reference, PipelineError> {
        if original.trim().is_empty() {
            return Err(PipelineError::Precondition(
                "original text must be non-empty".into(),
            ));
        }
        let summary = self.providers.summarize.summarize(original)?;
        Ok(Reference {
            text: original.to_string(),
            embedding: self.providers.embed.embed(original)?,
            summary_embedding: self.providers.embed.embed(&summary)?,
            summary,
        })
    }

    /// Score `variant` against the reference at document and summary level.
    pub fn score(&self, reference: &Reference, variant: &str) -> Result<PairScores, PipelineError> {
        if variant.trim().is_empty() {
            return Err(PipelineError::Precondition(
                "text to score must be non-empty".into(),
            ));
        }
        let embedding = self.providers.embed.embed(variant)?;
        let summary = self.providers.summarize.summarize(variant)?;
        let summary_embedding = self.providers.embed.embed(&summary)?;
        Ok(PairScores {
            doc_cosine: cosine_similarity(&reference.embedding, &embedding)?,
            doc_rouge1: rouge1_with(&self.analyzer, self.rouge, &reference.text, variant),
            sum_cosine: cosine_similarity(&reference.summary_embedding, &summary_embedding)?,
            sum_rouge1: rouge1_with(&self.analyzer, self.rouge, &reference.summary, &summary),
        })
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    providers: Providers,
    stopwords: Stopwords,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        providers: Providers,
        stopwords: Stopwords,
    ) -> Result<Self, PipelineError> {
        if config.strategies.is_empty() {
            return Err(PipelineError::Precondition(
                "at least one strategy must be enabled".into(),
            ));
        }
        if config.run_seed.is_none() && config.strategies.iter().any(|s| s.is_random()) {
            return Err(PipelineError::Precondition(
                "a seed is required when A4 or A5 is enabled".into(),
            ));
        }
        Ok(Pipeline {
            config,
            providers,
            stopwords,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }

    fn analyzer(&self) -> Analyzer<'_> {
        Analyzer::new(&self.stopwords)
    }

    pub fn scorer(&self) -> Scorer<'_> {
        Scorer::new(&self.providers, self.analyzer(), self.config.rouge)
    }

    pub fn reference(&self, original: &str) -> Result<Reference, PipelineError> {
        self.scorer().reference(original)
    }

    pub fn evaluate_variant(
        &self,
        reference: &Reference,
        variant: &str,
    ) -> Result<MetricQuad, PipelineError> {
        self.scorer().score(reference, variant).map(|s| s.quad())
    }

    /// Process one document. Failures are recorded in the result rather
    /// than returned.
    pub fn run_document(&self, doc: &Document) -> DocumentResult {
        let mut result = DocumentResult::new(doc);
        if doc.id.trim().is_empty() || doc.text.trim().is_empty() {
            result.status = Status::failed("document id and text must be non-empty");
            return result;
        }

        let simplified = match &doc.simplified {
            Some(s) => s.trim().to_string(),
            None => match simplify(
                &self.providers.chat,
                &self.config.simplify_template,
                &doc.text,
            ) {
                Ok(s) => s,
                Err(e) => {
                    warn!("{}: {e}", doc.id);
                    result.status = Status::failed(e);
                    return result;
                }
            },
        };
        result.simplified = Some(simplified.clone());

        let reference = match self.reference(&doc.text) {
            Ok(r) => r,
            Err(e) => {
                result.status = Status::failed(format!("scoring the original failed: {e}"));
                return result;
            }
        };
        let baseline = match self.evaluate_variant(&reference, &simplified) {
            Ok(b) => b,
            Err(e) => {
                result.status = Status::failed(format!("scoring the simplification failed: {e}"));
                return result;
            }
        };
        result.baseline = Some(baseline);

        let info = match build_missing_info(
            &self.analyzer(),
            &doc.text,
            &simplified,
            &self.providers.ner,
        ) {
            Ok(i) => i,
            Err(e) => {
                let e = PipelineError::Detection(e);
                warn!("{}: {e}", doc.id);
                result.status = Status::failed(e);
                return result;
            }
        };

        let ctx = PayloadContext {
            run_seed: self.config.run_seed,
            document_id: &doc.id,
            original: &doc.text,
            simplified: &simplified,
        };
        for &strategy in &self.config.strategies {
            let variant = self.run_variant(strategy, &info, ctx, &reference, baseline);
            if let Status::Failed { reason } = &variant.status {
                warn!("{} {strategy}: {reason}", doc.id);
            }
            result.variants.insert(strategy, variant);
        }
        result.missing_info = Some(info);
        result
    }

    fn run_variant(
        &self,
        strategy: Strategy,
        info: &MissingInfo,
        ctx: PayloadContext<'_>,
        reference: &Reference,
        baseline: MetricQuad,
    ) -> VariantResult {
        let chat = &self.providers.chat;
        let payload = match build_payload(strategy, info, ctx, chat) {
            Ok(p) => p,
            Err(e) => return VariantResult::failed(e, None, None),
        };
        let augmented = match regenerate(chat, ctx.original, ctx.simplified, &payload) {
            Ok(a) => a,
            Err(e) => {
                return VariantResult::failed(
                    format!("regeneration failed: {e}"),
                    Some(payload),
                    None,
                )
            }
        };
        // An unchanged text scores exactly like the baseline.
        let metrics = if augmented == ctx.simplified {
            Ok(baseline)
        } else {
            self.evaluate_variant(reference, &augmented)
        };
        match metrics {
            Ok(m) => VariantResult {
                status: Status::Ok,
                augmented_text: Some(augmented),
                payload: Some(payload),
                metrics: Some(m),
            },
            Err(e) => VariantResult::failed(
                format!("scoring failed: {e}"),
                Some(payload),
                Some(augmented),
            ),
        }
    }

    /// Process a corpus on `workers` threads. Results keep corpus order.
    pub fn run_corpus(&self, docs: &[Document]) -> Vec<DocumentResult> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.max(1))
            .build()
            .expect("thread pool");
        info!(
            "processing {} documents on {} workers",
            docs.len(),
            self.config.workers.max(1)
        );
        pool.install(|| docs.par_iter().map(|d| self.run_document(d)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::ChatMode;

    const LEXICON: &str =
        "methotrexate\nrheumatoid arthritis\nnsaids\nfolic acid\nliver function\n";

    fn pipeline(mode: ChatMode) -> Pipeline {
        let config = PipelineConfig {
            run_seed: Some(7),
            ..Default::default()
        };
        Pipeline::new(
            config,
            Providers::mock(mode, LEXICON, 384, 3),
            Stopwords::bundled().clone(),
        )
        .unwrap()
    }

    fn doc(id: &str, text: &str, simplified: Option<&str>) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            simplified: simplified.map(String::from),
        }
    }

    const ORIGINAL: &str = "Methotrexate is the usual first treatment for rheumatoid arthritis. \
        Methotrexate is taken weekly with folic acid. Doctors check liver function regularly. \
        NSAIDs relieve pain but do not slow rheumatoid arthritis.";
    const SIMPLIFIED: &str = "A weekly medicine is the usual first treatment for joint disease. \
        Painkillers help but do not slow the disease.";

    #[test]
    fn identity_scores_one() {
        let p = pipeline(ChatMode::Echo);
        let r = p.reference(ORIGINAL).unwrap();
        let q = p.evaluate_variant(&r, ORIGINAL).unwrap();
        assert!((q.doc_cosine - 1.0).abs() <= 1e-6);
        assert_eq!(q.doc_rouge1, 1.0);
        assert!((q.sum_cosine - 1.0).abs() <= 1e-6);
        assert_eq!(q.sum_rouge1, 1.0);
    }

    #[test]
    fn cat_mat_rouge() {
        let p = pipeline(ChatMode::Echo);
        let r = p.reference("the cat sat on the mat").unwrap();
        let q = p.evaluate_variant(&r, "the cat is on a mat").unwrap();
        assert!((q.doc_rouge1 - 8.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_vocabulary_scores_zero() {
        // 384 buckets; the stems below were checked to land in distinct buckets.
        let p = pipeline(ChatMode::Echo);
        let r = p.reference("swollen knuckles").unwrap();
        let q = p.evaluate_variant(&r, "blood tests").unwrap();
        assert_eq!(q.doc_rouge1, 0.0);
        assert!(q.doc_cosine.abs() <= 1e-9);
    }

    #[test]
    fn empty_inputs_rejected() {
        let p = pipeline(ChatMode::Echo);
        assert!(matches!(
            simplify(&p.providers.chat, SIMPLIFY, ""),
            Err(PipelineError::Precondition(_))
        ));
        let r = p.reference(ORIGINAL).unwrap();
        assert!(p.evaluate_variant(&r, " ").is_err());
    }

    const SIMPLIFY: &str = prompts::SIMPLIFY_TEMPLATE;

    #[test]
    fn presimplified_skips_chat() {
        let p = pipeline(ChatMode::Echo);
        let result = p.run_document(&doc("d1", ORIGINAL, Some(SIMPLIFIED)));
        assert_eq!(result.simplified.as_deref(), Some(SIMPLIFIED));
        assert!(result.status.is_ok());
    }

    #[test]
    fn echo_law() {
        let p = pipeline(ChatMode::Echo);
        let result = p.run_document(&doc("d1", ORIGINAL, Some(SIMPLIFIED)));
        let baseline = result.baseline.unwrap();
        assert_eq!(result.variants.len(), 5);
        for (s, v) in &result.variants {
            assert_eq!(v.metrics, Some(baseline), "{s}");
        }
    }

    #[test]
    fn short_circuit_law() {
        let p = pipeline(ChatMode::Append);
        let result = p.run_document(&doc("d1", ORIGINAL, Some(ORIGINAL)));
        assert_eq!(
            result.missing_info.as_ref().unwrap(),
            &MissingInfo::default()
        );
        let baseline = result.baseline.unwrap();
        for v in result.variants.values() {
            assert_eq!(v.augmented_text.as_deref(), Some(ORIGINAL));
            assert_eq!(v.metrics, Some(baseline));
        }
        assert_eq!(p.providers.chat.stats().backend_calls(), 0);
    }

    #[test]
    fn append_improves_rouge() {
        let p = pipeline(ChatMode::Append);
        let result = p.run_document(&doc("d1", ORIGINAL, Some(SIMPLIFIED)));
        let baseline = result.baseline.unwrap();
        let a1 = result.variants[&Strategy::AllEntities].metrics.unwrap();
        assert!(a1.doc_rouge1 > baseline.doc_rouge1);
        let info = result.missing_info.unwrap();
        assert_eq!(
            info.missing_entities,
            [
                "folic acid",
                "liver function",
                "methotrexate",
                "nsaids",
                "rheumatoid arthritis"
            ]
        );
    }

    #[test]
    fn mock_simplification_used_without_presimplified_text() {
        let p = pipeline(ChatMode::Append);
        let result = p.run_document(&doc("d1", "One fact. Two fact. Three fact.", None));
        assert_eq!(result.simplified.as_deref(), Some("One fact. Three fact."));
    }

    #[test]
    fn config_validation() {
        let providers = Providers::mock(ChatMode::Echo, "", 8, 3);
        let no_seed = PipelineConfig::default();
        assert!(Pipeline::new(no_seed, providers.clone(), Stopwords::bundled().clone()).is_err());
        let none = PipelineConfig {
            strategies: vec![],
            run_seed: Some(1),
            ..Default::default()
        };
        assert!(Pipeline::new(none, providers.clone(), Stopwords::bundled().clone()).is_err());
        let deterministic_only = PipelineConfig {
            strategies: vec![Strategy::AllEntities],
            ..Default::default()
        };
        assert!(Pipeline::new(deterministic_only, providers, Stopwords::bundled().clone()).is_ok());
    }

    #[test]
    fn invalid_document_recorded() {
        let p = pipeline(ChatMode::Echo);
        let r = p.run_document(&doc("d1", "  ", None));
        assert!(!r.status.is_ok());
        assert!(r.baseline.is_none());
    }
}
