//! Missing-information detection between an original and a simplified text.
//!
//! Two independent signals are computed: stems that were frequent in the
//! original but are rare in the simplification, and named entities that the
//! simplification no longer mentions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::providers::{NerClient, ProviderError};
use crate::text_analysis::{Analyzer, PreprocessedText};

/// Minimum count in the original for a stem to be tracked, and the count the
/// simplification must reach for it to count as retained.
pub const FREQUENCY_THRESHOLD: usize = 2;

/// An entity as reported by the recognizer. Offsets are character offsets,
/// or both -1 when the recognizer reports no spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub text: String,
    #[serde(default)]
    pub label: String,
    #[serde(default = "no_offset")]
    pub start: i64,
    #[serde(default = "no_offset")]
    pub end: i64,
}

fn no_offset() -> i64 {
    -1
}

/// Lowercase and collapse internal whitespace.
pub fn canonical_entity(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySet {
    pub canonical: BTreeSet<String>,
    pub mentions: BTreeMap<String, Vec<EntityMention>>,
}

impl EntitySet {
    pub fn from_mentions(mentions: impl IntoIterator<Item = EntityMention>) -> Self {
        let mut set = EntitySet::default();
        for mention in mentions {
            let key = canonical_entity(&mention.text);
            if key.is_empty() {
                continue;
            }
            set.canonical.insert(key.clone());
            set.mentions.entry(key).or_default().push(mention);
        }
        set
    }

    pub fn from_keys<'a>(keys: impl IntoIterator<Item = &'a str>) -> Self {
        Self::from_mentions(keys.into_iter().map(|k| EntityMention {
            text: k.to_string(),
            label: String::new(),
            start: -1,
            end: -1,
        }))
    }
}

/// What a simplification lost.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingInfo {
    pub missing_stems: BTreeSet<String>,
    /// Surface forms of `missing_stems`, ordered by stem.
    pub missing_words: Vec<String>,
    /// Canonical entity keys, sorted.
    pub missing_entities: Vec<String>,
    /// Number of missing stems.
    pub k: usize,
}

impl MissingInfo {
    pub fn is_empty(&self) -> bool {
        self.missing_stems.is_empty() && self.missing_entities.is_empty()
    }
}

/// Stems seen at least twice in the original but fewer than twice in the
/// simplification.
pub fn missing_words(
    original: &PreprocessedText,
    simplified: &PreprocessedText,
) -> BTreeSet<String> {
    original
        .stem_frequencies
        .iter()
        .filter(|(stem, n)| {
            **n >= FREQUENCY_THRESHOLD && simplified.frequency(stem) < FREQUENCY_THRESHOLD
        })
        .map(|(stem, _)| stem.clone())
        .collect()
}

/// Canonical keys of `original` absent from `simplified`, sorted.
pub fn missing_entities(original: &EntitySet, simplified: &EntitySet) -> Vec<String> {
    original
        .canonical
        .difference(&simplified.canonical)
        .cloned()
        .collect()
}

/// Assemble [`MissingInfo`] from already-extracted pieces.
pub fn missing_info_from_parts(
    original: &PreprocessedText,
    simplified: &PreprocessedText,
    original_entities: &EntitySet,
    simplified_entities: &EntitySet,
) -> MissingInfo {
    let missing_stems = missing_words(original, simplified);
    let missing_words = missing_stems
        .iter()
        .map(|s| {
            original
                .surface_by_stem
                .get(s)
                .cloned()
                .unwrap_or_else(|| s.clone())
        })
        .collect();
    MissingInfo {
        k: missing_stems.len(),
        missing_stems,
        missing_words,
        missing_entities: missing_entities(original_entities, simplified_entities),
    }
}

/// Run both detectors. Makes exactly two recognizer calls.
pub fn build_missing_info(
    analyzer: &Analyzer<'_>,
    original_text: &str,
    simplified_text: &str,
    ner: &NerClient,
) -> Result<MissingInfo, ProviderError> {
    let original = analyzer.preprocess(original_text);
    let simplified = analyzer.preprocess(simplified_text);
    let original_entities = EntitySet::from_mentions(ner.extract_entities(original_text)?);
    let simplified_entities = EntitySet::from_mentions(ner.extract_entities(simplified_text)?);
    Ok(missing_info_from_parts(
        &original,
        &simplified,
        &original_entities,
        &simplified_entities,
    ))
}
