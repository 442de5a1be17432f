//! Tokenization, stopword removal, stemming and unigram extraction.
//!
//! Everything here is a pure function of its input text and the stopword
//! list in use.

mod porter;
mod stopwords;
mod tokenizer;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use porter::stem;
pub use stopwords::{
    Stopwords, BUNDLED as BUNDLED_STOPWORDS, BUNDLED_SHA256 as BUNDLED_STOPWORDS_SHA256,
};
pub use tokenizer::{token_spans, tokenize, Token};

/// A text after tokenization, stopword removal and stemming.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessedText {
    pub tokens: Vec<Token>,
    /// Stems of the non-stopword tokens, in text order.
    pub stems: Vec<String>,
    pub stem_frequencies: BTreeMap<String, usize>,
    /// The most frequent surface form behind each stem (first seen wins ties).
    pub surface_by_stem: BTreeMap<String, String>,
}

impl PreprocessedText {
    /// Occurrences of `stem` after preprocessing, zero when absent.
    pub fn frequency(&self, stem: &str) -> usize {
        self.stem_frequencies.get(stem).copied().unwrap_or(0)
    }
}

/// How ROUGE unigrams are derived from raw text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougePreprocess {
    /// Lowercased tokens, nothing removed.
    #[default]
    None,
    /// Stopwords removed and the remainder stemmed.
    Full,
}

/// Preprocessing bound to a particular stopword list.
#[derive(Debug, Clone, Copy)]
pub struct Analyzer<'a> {
    stopwords: &'a Stopwords,
}

impl Default for Analyzer<'static> {
    fn default() -> Self {
        Analyzer {
            stopwords: Stopwords::bundled(),
        }
    }
}

impl<'a> Analyzer<'a> {
    pub fn new(stopwords: &'a Stopwords) -> Self {
        Analyzer { stopwords }
    }

    pub fn stopwords(&self) -> &'a Stopwords {
        self.stopwords
    }

    pub fn preprocess(&self, text: &str) -> PreprocessedText {
        let tokens = tokenize(text);
        let mut stems = Vec::new();
        let mut stem_frequencies = BTreeMap::new();
        // stem -> surface -> (count, first position)
        let mut surfaces: HashMap<String, HashMap<&str, (usize, usize)>> = HashMap::new();

        for (position, token) in tokens.iter().enumerate() {
            if self.stopwords.contains(&token.normalized) {
                continue;
            }
            let stemmed = stem(&token.normalized);
            *stem_frequencies.entry(stemmed.clone()).or_insert(0) += 1;
            let entry = surfaces
                .entry(stemmed.clone())
                .or_default()
                .entry(token.surface.as_str())
                .or_insert((0, position));
            entry.0 += 1;
            stems.push(stemmed);
        }

        let surface_by_stem = surfaces
            .into_iter()
            .map(|(stemmed, forms)| {
                let (surface, _) = forms
                    .into_iter()
                    .max_by(|(_, (ca, pa)), (_, (cb, pb))| ca.cmp(cb).then(pb.cmp(pa)))
                    .expect("every stem has at least one surface form");
                (stemmed, surface.to_string())
            })
            .collect();

        PreprocessedText {
            tokens: tokens.clone(),
            stems,
            stem_frequencies,
            surface_by_stem,
        }
    }

    /// Unigram counts used by ROUGE under the given preprocessing mode.
    pub fn unigram_counts(&self, text: &str, mode: RougePreprocess) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        match mode {
            RougePreprocess::None => {
                for token in tokenize(text) {
                    *counts.entry(token.normalized).or_insert(0) += 1;
                }
            }
            RougePreprocess::Full => {
                for stemmed in self.preprocess(text).stems {
                    *counts.entry(stemmed).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    pub fn unigrams(&self, text: &str, mode: RougePreprocess) -> BTreeSet<String> {
        self.unigram_counts(text, mode).into_keys().collect()
    }
}

/// [`Analyzer::preprocess`] with the bundled stopword list.
pub fn preprocess(text: &str) -> PreprocessedText {
    Analyzer::default().preprocess(text)
}

/// The set of lowercased tokens of `text`. No stopword removal, no stemming.
pub fn unigram_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().map(|t| t.normalized).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_preprocesses_to_nothing() {
        assert_eq!(preprocess(""), PreprocessedText::default());
    }

    #[test]
    fn drugs_fixture() {
        let p = preprocess("The drugs are drugs");
        assert_eq!(p.stems, ["drug", "drug"]);
        assert_eq!(
            p.stem_frequencies,
            BTreeMap::from([("drug".to_string(), 2)])
        );
        assert_eq!(p.surface_by_stem["drug"], "drugs");
    }

    #[test]
    fn diagnosis_and_diagnoses_count_separately() {
        // Porter leaves these two on different stems.
        let p = preprocess("Diagnosis and diagnoses differ");
        assert_eq!(p.frequency("diagnosi"), 1);
        assert_eq!(p.frequency("diagnos"), 1);
        assert_eq!(p.frequency("differ"), 1);
        assert_eq!(p.stems.len(), 3);
    }

    #[test]
    fn surface_prefers_most_frequent_then_first() {
        let p = preprocess("Drug drugs drugs Drug");
        assert_eq!(p.surface_by_stem["drug"], "Drug");
        let p = preprocess("drugs Drug drug drug");
        assert_eq!(p.surface_by_stem["drug"], "drug");
    }

    #[test]
    fn unigram_examples() {
        let cat = unigram_set("the cat sat on the mat");
        assert_eq!(cat.len(), 5);
        assert!(["the", "cat", "sat", "on", "mat"]
            .iter()
            .all(|w| cat.contains(*w)));
        assert!(unigram_set("").is_empty());
        assert_eq!(unigram_set("A a A"), BTreeSet::from(["a".to_string()]));
    }

    #[test]
    fn full_rouge_preprocessing_uses_stems() {
        let analyzer = Analyzer::default();
        let set = analyzer.unigrams("The drugs helped", RougePreprocess::Full);
        assert_eq!(
            set,
            BTreeSet::from(["drug".to_string(), "help".to_string()])
        );
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec![
            "the",
            "Pain",
            "pain",
            "drugs",
            "drug",
            "of",
            "Arthritis",
            "joint",
            "joints",
            "x-ray",
            "don't",
            "2mg",
            "swelling",
            "is",
            "and",
            "Methotrexate",
        ])
        .prop_map(str::to_string)
    }

    fn separator() -> impl Strategy<Value = String> {
        prop::sample::select(vec![" ", ", ", ". ", "\n", " (", ") ", "; "]).prop_map(str::to_string)
    }

    fn text() -> impl Strategy<Value = String> {
        prop::collection::vec((word(), separator()), 0..40)
            .prop_map(|parts| parts.into_iter().map(|(w, s)| w + &s).collect())
    }

    proptest! {
        #[test]
        fn tokenize_is_stable_under_rejoin(t in text()) {
            let first: Vec<String> = tokenize(&t).into_iter().map(|x| x.surface).collect();
            let rejoined = first.join(" ");
            let second: Vec<String> = tokenize(&rejoined).into_iter().map(|x| x.surface).collect();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn token_invariants(t in text()) {
            for token in tokenize(&t) {
                prop_assert!(!token.surface.is_empty());
                prop_assert!(!token.surface.chars().any(char::is_whitespace));
                prop_assert_eq!(token.normalized, token.surface.to_lowercase());
            }
        }

        #[test]
        fn frequencies_match_stem_list(t in text()) {
            let p = preprocess(&t);
            prop_assert_eq!(p.stem_frequencies.values().sum::<usize>(), p.stems.len());
            for (s, n) in &p.stem_frequencies {
                prop_assert_eq!(*n, p.stems.iter().filter(|x| *x == s).count());
            }
            for s in p.surface_by_stem.keys() {
                prop_assert!(p.frequency(s) >= 1);
            }
            let kept: Vec<String> = p.tokens.iter()
                .filter(|t| !Stopwords::bundled().contains(&t.normalized))
                .map(|t| stem(&t.normalized))
                .collect();
            prop_assert_eq!(kept, p.stems);
        }

        #[test]
        fn unigram_set_ignores_order_and_duplicates(words in prop::collection::vec(word(), 0..30)) {
            let forward = words.join(" ");
            let mut reversed = words.clone();
            reversed.reverse();
            reversed.extend(words.iter().take(5).cloned());
            prop_assert_eq!(unigram_set(&forward), unigram_set(&reversed.join(" ")));
        }
    }
}
