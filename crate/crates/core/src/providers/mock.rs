//! Deterministic in-process stand-ins for every provider capability.
//!
//! The mocks answer with exactly the JSON bodies the HTTP endpoints would
//! return, so responses flow through the same decoding and caching path as
//! live ones.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, Capability, ProviderError, ProviderRequest};
use crate::text_analysis::{token_spans, tokenize, Analyzer, Stopwords};

/// Lexicon used when no lexicon file is configured.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon_default.txt");

// Markers of the prompts the chat mock knows how to interpret.
const ORIGINAL_MARKER: &str = "- Original Text: ";
const SIMPLIFIED_MARKER: &str = "\n- Current Simplified Text: ";
const INSERT_MARKER: &str = "\n- Important Entities Missing: ";
const RANK_MARKER: &str = "\n- Missing Entities: ";
const INSTRUCTIONS_MARKER: &str = "\n\nInstructions:";
const SIMPLIFY_START: &str = "Text to simplify:\n";
const SIMPLIFY_END: &str = "\n\nPlease provide only the simplified text";

/// Behaviour of the mock chat model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatMode {
    /// Return the current simplified text unchanged.
    Echo,
    /// Append every requested item to the current simplified text.
    #[default]
    Append,
    /// Answer from a canned digest -> response map.
    Template,
}

/// Split into sentences: maximal runs ending in `.`, `!`, `?` or the end of
/// the text. Returned slices are trimmed and never empty.
pub fn sentences(text: &str) -> Vec<&str> {
    let is_end = |c: char| matches!(c, '.' | '!' | '?');
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_end(c) {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, n)) = chars.peek() {
            if !is_end(n) {
                break;
            }
            end = j + n.len_utf8();
            chars.next();
        }
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            out.push(sentence);
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// The first `n` sentences of `text`, sliced from the source so spacing and
/// punctuation survive.
pub fn leading_sentences(text: &str, n: usize) -> String {
    let all = sentences(text);
    match (all.first(), all.get(n.max(1) - 1).or(all.last())) {
        (Some(first), Some(last)) => {
            let start = first.as_ptr() as usize - text.as_ptr() as usize;
            let end = last.as_ptr() as usize - text.as_ptr() as usize + last.len();
            text[start..end].to_string()
        }
        _ => String::new(),
    }
}

fn between<'a>(haystack: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = haystack.find(start)? + start.len();
    let rest = &haystack[from..];
    Some(match rest.find(end) {
        Some(to) => &rest[..to],
        None => rest,
    })
}

fn token_key(text: &str) -> String {
    tokenize(text)
        .into_iter()
        .map(|t| t.normalized)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct MockChat {
    mode: ChatMode,
    canned: BTreeMap<String, Value>,
    fallback: Option<ChatMode>,
}

impl MockChat {
    pub fn new(mode: ChatMode) -> Self {
        MockChat {
            mode,
            canned: BTreeMap::new(),
            fallback: None,
        }
    }

    /// Template mode. Requests whose digest is not in `canned` are answered
    /// by `fallback`, or rejected when there is none.
    pub fn template(canned: BTreeMap<String, Value>, fallback: Option<ChatMode>) -> Self {
        MockChat {
            mode: ChatMode::Template,
            canned,
            fallback: fallback.filter(|m| *m != ChatMode::Template),
        }
    }

    /// Load a canned-response file: a JSON object mapping request digests to
    /// either a response string or a full response body.
    pub fn load_canned(path: &Path) -> Result<BTreeMap<String, Value>, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("parsing {}: {e}", path.display())))
    }

    fn respond(
        &self,
        mode: ChatMode,
        request: &ProviderRequest,
        prompt: &str,
    ) -> Result<Value, ProviderError> {
        let content = match mode {
            ChatMode::Template => {
                let digest = request.cache_key().to_hex();
                return match (self.canned.get(&digest), self.fallback) {
                    (Some(Value::String(s)), _) => Ok(chat_body(s)),
                    (Some(body), _) => Ok(body.clone()),
                    (None, Some(fallback)) => self.respond(fallback, request, prompt),
                    (None, None) => Err(ProviderError::Rejected {
                        status: 404,
                        body: format!("no canned response for digest {digest}"),
                    }),
                };
            }
            ChatMode::Echo | ChatMode::Append => {
                if prompt.contains(INSERT_MARKER) {
                    let simplified =
                        between(prompt, SIMPLIFIED_MARKER, INSERT_MARKER).unwrap_or("");
                    let items = between(prompt, INSERT_MARKER, INSTRUCTIONS_MARKER).unwrap_or("");
                    regenerate(mode, simplified, items)
                } else if prompt.contains(RANK_MARKER) {
                    let entities = between(prompt, RANK_MARKER, INSTRUCTIONS_MARKER).unwrap_or("");
                    let original =
                        between(prompt, ORIGINAL_MARKER, SIMPLIFIED_MARKER).unwrap_or("");
                    rank(original, entities)
                } else if prompt.contains(SIMPLIFY_START) {
                    simplify(between(prompt, SIMPLIFY_START, SIMPLIFY_END).unwrap_or(""))
                } else {
                    return Err(ProviderError::Rejected {
                        status: 400,
                        body: "mock chat does not recognise this prompt".into(),
                    });
                }
            }
        };
        Ok(chat_body(&content))
    }
}

fn chat_body(content: &str) -> Value {
    json!({ "choices": [ { "message": { "role": "assistant", "content": content } } ] })
}

fn regenerate(mode: ChatMode, simplified: &str, items: &str) -> String {
    let simplified = simplified.trim();
    if mode == ChatMode::Echo {
        return simplified.to_string();
    }
    let mut out = simplified.to_string();
    for item in items.split(", ").map(str::trim).filter(|s| !s.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(item);
    }
    out
}

/// Regroup the space-joined entity list into phrases found in the original
/// text (longest first), then rank them by first occurrence.
fn rank(original: &str, joined: &str) -> String {
    let haystack = format!(" {} ", token_key(original));
    let words: Vec<&str> = joined.split_whitespace().collect();
    let mut groups: Vec<String> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let mut taken = 1;
        for j in (i + 1..=words.len()).rev() {
            let candidate = words[i..j].join(" ");
            if haystack.contains(&format!(" {} ", token_key(&candidate))) {
                taken = j - i;
                break;
            }
        }
        let group = words[i..i + taken].join(" ");
        if !groups.contains(&group) {
            groups.push(group);
        }
        i += taken;
    }
    let position = |g: &String| {
        haystack
            .find(&format!(" {} ", token_key(g)))
            .unwrap_or(usize::MAX)
    };
    let mut ranked: Vec<(usize, usize, String)> = groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| (position(&g), i, g))
        .collect();
    ranked.sort();
    let ranked: Vec<String> = ranked.into_iter().map(|(_, _, g)| g).collect();
    let top: Vec<&String> = ranked.iter().take(3).collect();
    json!({ "ranked_entities": ranked, "top_3_entities": top }).to_string()
}

/// Keep every other sentence, starting with the first.
fn simplify(original: &str) -> String {
    sentences(original.trim())
        .into_iter()
        .step_by(2)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Phrase lexicon for the mock entity recognizer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    phrases: Vec<Vec<String>>,
}

impl Lexicon {
    /// One phrase per line; blank lines and lines starting with `#` are skipped.
    pub fn parse(contents: &str) -> Self {
        let mut seen = HashSet::new();
        let mut phrases = Vec::new();
        for line in contents.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<String> = tokenize(line).into_iter().map(|t| t.normalized).collect();
            if !tokens.is_empty() && seen.insert(tokens.clone()) {
                phrases.push(tokens);
            }
        }
        Lexicon { phrases }
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        std::fs::read_to_string(path)
            .map(|s| Self::parse(&s))
            .map_err(|e| ProviderError::Config(format!("reading lexicon {}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Longest-match, case-insensitive, whole-token matches in text order.
    /// Offsets are character offsets into `text`.
    pub fn find(&self, text: &str) -> Vec<Value> {
        let spans = token_spans(text);
        let lowered: Vec<String> = spans
            .iter()
            .map(|s| text[s.clone()].to_lowercase())
            .collect();
        let char_offset = |byte: usize| text[..byte].chars().count();

        let mut out = Vec::new();
        let mut i = 0;
        while i < spans.len() {
            let best = self
                .phrases
                .iter()
                .filter(|p| {
                    i + p.len() <= spans.len()
                        && p.iter().zip(&lowered[i..]).all(|(a, b)| a == b)
                        && (i..i + p.len() - 1).all(|k| {
                            text[spans[k].end..spans[k + 1].start]
                                .chars()
                                .all(char::is_whitespace)
                        })
                })
                .map(Vec::len)
                .max();
            match best {
                Some(len) => {
                    let (start, end) = (spans[i].start, spans[i + len - 1].end);
                    out.push(json!({
                        "text": &text[start..end],
                        "label": "ENTITY",
                        "start": char_offset(start),
                        "end": char_offset(end),
                    }));
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

/// A mock backend for one capability.
#[derive(Debug, Clone)]
pub enum MockBackend {
    Chat(MockChat),
    /// Hashing bag-of-stems embedding.
    Embed {
        dimension: usize,
        stopwords: Stopwords,
    },
    Ner(Lexicon),
    /// Extractive summary: the first `sentences` sentences.
    Summarize {
        sentences: usize,
    },
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// The mock embedding: stem counts bucketed by `fnv1a64(stem) % dimension`.
pub fn hashed_bag_of_stems(text: &str, dimension: usize, stopwords: &Stopwords) -> Vec<f64> {
    let mut v = vec![0.0; dimension];
    for (stem, count) in Analyzer::new(stopwords).preprocess(text).stem_frequencies {
        v[(fnv1a64(stem.as_bytes()) % dimension as u64) as usize] += count as f64;
    }
    v
}

fn payload_str<'a>(request: &'a ProviderRequest, field: &str) -> Result<&'a str, ProviderError> {
    request
        .payload
        .get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::Rejected {
            status: 400,
            body: format!("payload lacks string field {field:?}"),
        })
}

impl Backend for MockBackend {
    fn send(&self, request: &ProviderRequest) -> Result<Value, ProviderError> {
        let expected = match self {
            MockBackend::Chat(_) => Capability::Chat,
            MockBackend::Embed { .. } => Capability::Embed,
            MockBackend::Ner(_) => Capability::Ner,
            MockBackend::Summarize { .. } => Capability::Summarize,
        };
        if request.capability != expected {
            return Err(ProviderError::Rejected {
                status: 404,
                body: format!(
                    "{} mock cannot serve {}",
                    expected.as_str(),
                    request.capability.as_str()
                ),
            });
        }
        match self {
            MockBackend::Chat(chat) => {
                let prompt = request
                    .payload
                    .pointer("/messages/0/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| ProviderError::Rejected {
                        status: 400,
                        body: "missing messages[0].content".into(),
                    })?;
                chat.respond(chat.mode, request, prompt)
            }
            MockBackend::Embed {
                dimension,
                stopwords,
            } => {
                let text = payload_str(request, "input")?;
                Ok(json!({ "embedding": hashed_bag_of_stems(text, *dimension, stopwords) }))
            }
            MockBackend::Ner(lexicon) => {
                let text = payload_str(request, "text")?;
                Ok(json!({ "entities": lexicon.find(text) }))
            }
            MockBackend::Summarize { sentences } => {
                let text = payload_str(request, "text")?;
                Ok(json!({ "summary": leading_sentences(text, *sentences) }))
            }
        }
    }

    fn advertised_dimension(&self) -> Result<Option<usize>, ProviderError> {
        Ok(match self {
            MockBackend::Embed { dimension, .. } => Some(*dimension),
            _ => None,
        })
    }
}
