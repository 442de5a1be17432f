//! The five reinsertion strategies and the two prompts that drive them.
//!
//! | code | items inserted                                      |
//! |------|-----------------------------------------------------|
//! | A1   | every missing entity                                |
//! | A2   | every missing word (surface form)                   |
//! | A3   | the three entities the chat model ranks highest     |
//! | A4   | three entities drawn at random                      |
//! | A5   | `k` entities drawn at random, `k` = missing words   |

pub mod prompts;
pub mod rng;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::gap_detection::{canonical_entity, MissingInfo};
use crate::providers::{ChatClient, ProviderError};
use rng::{derive_seed, sample_without_replacement, SplitMix64};

/// Number of entities kept by A3 and drawn by A4.
pub const TOP_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "A1")]
    AllEntities,
    #[serde(rename = "A2")]
    AllWords,
    #[serde(rename = "A3")]
    TopRankedEntities,
    #[serde(rename = "A4")]
    RandomThreeEntities,
    #[serde(rename = "A5")]
    RandomKEntities,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::AllEntities,
        Strategy::AllWords,
        Strategy::TopRankedEntities,
        Strategy::RandomThreeEntities,
        Strategy::RandomKEntities,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Strategy::AllEntities => "A1",
            Strategy::AllWords => "A2",
            Strategy::TopRankedEntities => "A3",
            Strategy::RandomThreeEntities => "A4",
            Strategy::RandomKEntities => "A5",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(
            self,
            Strategy::RandomThreeEntities | Strategy::RandomKEntities
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown strategy {s:?} (expected A1..A5)"))
    }
}

/// What the ranking call returned, after validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub ranked: Vec<String>,
    pub top3: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionPayload {
    pub strategy: Strategy,
    pub items: Vec<String>,
    /// Sampling seed, for A4 and A5.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Ranking behind an A3 payload, when the model was asked.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ranking_trace: Option<Ranking>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("ranking response could not be parsed: {0}")]
    RankingParse(String),
    #[error("random strategy {0} requires a run seed")]
    MissingSeed(Strategy),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Inputs shared by every strategy for one document.
#[derive(Debug, Clone, Copy)]
pub struct PayloadContext<'a> {
    pub run_seed: Option<u64>,
    pub document_id: &'a str,
    pub original: &'a str,
    pub simplified: &'a str,
}

fn dedup(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    items
        .into_iter()
        .filter(|s| !s.trim().is_empty() && seen.insert(s.clone()))
        .collect()
}

/// Choose the items a strategy inserts. Only A3 with more than three
/// missing entities talks to the chat model.
pub fn build_payload(
    strategy: Strategy,
    info: &MissingInfo,
    ctx: PayloadContext<'_>,
    chat: &ChatClient,
) -> Result<InsertionPayload, StrategyError> {
    let entities = &info.missing_entities;
    let mut payload = InsertionPayload {
        strategy,
        items: Vec::new(),
        seed: None,
        ranking_trace: None,
    };
    match strategy {
        Strategy::AllEntities => payload.items = dedup(entities.iter().cloned()),
        Strategy::AllWords => payload.items = dedup(info.missing_words.iter().cloned()),
        Strategy::TopRankedEntities => {
            if entities.len() <= TOP_N {
                payload.items = dedup(entities.iter().cloned());
            } else {
                let ranking = rank_entities(chat, ctx.original, ctx.simplified, entities)?;
                payload.items = ranking.top3.clone();
                payload.ranking_trace = Some(ranking);
            }
        }
        Strategy::RandomThreeEntities | Strategy::RandomKEntities => {
            let run_seed = ctx.run_seed.ok_or(StrategyError::MissingSeed(strategy))?;
            let seed = derive_seed(run_seed, ctx.document_id, strategy.code());
            let count = if strategy == Strategy::RandomThreeEntities {
                TOP_N
            } else {
                info.k
            };
            let mut rng = SplitMix64::new(seed);
            payload.items = sample_without_replacement(entities, count, &mut rng);
            payload.seed = Some(seed);
        }
    }
    Ok(payload)
}

/// The first balanced `{...}` in `text` that parses as a JSON object.
pub fn extract_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    let bytes = text.as_bytes();
    for start in text.match_indices('{').map(|(i, _)| i) {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (offset, &b) in bytes[start..].iter().enumerate() {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate = &text[start..start + offset + 1];
                        if let Ok(Value::Object(map)) = serde_json::from_str(candidate) {
                            return Some(map);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    None
}

/// Ask the chat model to rank `entities` and validate its answer.
///
/// Returned names are matched back to the inputs case- and
/// whitespace-insensitively; unknown or repeated names are dropped. A
/// malformed top-3 list is truncated, or padded from the ranking.
pub fn rank_entities(
    chat: &ChatClient,
    original: &str,
    simplified: &str,
    entities: &[String],
) -> Result<Ranking, StrategyError> {
    if entities.is_empty() {
        return Err(StrategyError::RankingParse("nothing to rank".into()));
    }
    let prompt = prompts::ranking_prompt(original, simplified, entities);
    let response = chat.chat_complete(&prompt)?;
    parse_ranking(&response, entities)
}

pub fn parse_ranking(response: &str, entities: &[String]) -> Result<Ranking, StrategyError> {
    let object = extract_json_object(response)
        .ok_or_else(|| StrategyError::RankingParse("no JSON object in response".into()))?;

    let known: HashMap<String, &String> =
        entities.iter().map(|e| (canonical_entity(e), e)).collect();
    let validate = |key: &str| -> Vec<String> {
        let Some(list) = object.get(key).and_then(Value::as_array) else {
            return Vec::new();
        };
        let mut out: Vec<String> = Vec::new();
        for item in list {
            match item.as_str().and_then(|s| known.get(&canonical_entity(s))) {
                Some(entity) if !out.contains(entity) => out.push((*entity).clone()),
                Some(_) => {}
                None => warn!("ranking response names an unknown entity: {item}"),
            }
        }
        out
    };

    let ranked = validate("ranked_entities");
    if ranked.is_empty() {
        return Err(StrategyError::RankingParse(
            "ranked_entities is empty or missing".into(),
        ));
    }
    let mut top3 = validate("top_3_entities");
    top3.truncate(TOP_N);
    let wanted = TOP_N.min(ranked.len());
    for entity in &ranked {
        if top3.len() >= wanted {
            break;
        }
        if !top3.contains(entity) {
            top3.push(entity.clone());
        }
    }
    Ok(Ranking { ranked, top3 })
}

/// Rewrite `simplified` with the payload's items. An empty payload returns
/// `simplified` unchanged without calling the model.
pub fn regenerate(
    chat: &ChatClient,
    original: &str,
    simplified: &str,
    payload: &InsertionPayload,
) -> Result<String, ProviderError> {
    if payload.items.is_empty() {
        return Ok(simplified.to_string());
    }
    let prompt = prompts::regeneration_prompt(original, simplified, &payload.items);
    Ok(chat.chat_complete(&prompt)?.trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{Capability, ChatMode, Client, MockBackend, MockChat, Providers};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn info(entities: &[&str], words: &[&str]) -> MissingInfo {
        MissingInfo {
            missing_stems: words.iter().map(|w| w.to_lowercase()).collect(),
            missing_words: words.iter().map(|w| w.to_string()).collect(),
            missing_entities: entities.iter().map(|e| e.to_string()).collect(),
            k: words.len(),
        }
    }

    fn ctx<'a>(seed: Option<u64>) -> PayloadContext<'a> {
        PayloadContext {
            run_seed: seed,
            document_id: "doc-1",
            original: "Original text.",
            simplified: "Simple text.",
        }
    }

    fn chat(mode: ChatMode) -> ChatClient {
        Providers::mock(mode, "", 16, 3).chat
    }

    fn canned_chat(reply: &str) -> ChatClient {
        // answer every prompt with `reply`
        struct Fixed(String);
        impl crate::providers::Backend for Fixed {
            fn send(&self, _: &crate::providers::ProviderRequest) -> Result<Value, ProviderError> {
                Ok(serde_json::json!({"choices": [{"message": {"content": self.0}}]}))
            }
        }
        ChatClient(Client::new(
            Capability::Chat,
            "fixed",
            Arc::new(Fixed(reply.to_string())),
        ))
    }

    #[test]
    fn strategy_codes_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.code().parse::<Strategy>().unwrap(), s);
            assert_eq!(
                serde_json::to_string(&s).unwrap(),
                format!("\"{}\"", s.code())
            );
        }
        assert!("A6".parse::<Strategy>().is_err());
    }

    #[test]
    fn a1_passes_entities_through() {
        let p = build_payload(
            Strategy::AllEntities,
            &info(&["methotrexate", "nsaid"], &[]),
            ctx(None),
            &chat(ChatMode::Echo),
        )
        .unwrap();
        assert_eq!(p.items, ["methotrexate", "nsaid"]);
        assert_eq!(p.seed, None);
    }

    #[test]
    fn a2_uses_surface_words() {
        let p = build_payload(
            Strategy::AllWords,
            &info(&["gout"], &["Aspirin", "joints"]),
            ctx(None),
            &chat(ChatMode::Echo),
        )
        .unwrap();
        assert_eq!(p.items, ["Aspirin", "joints"]);
    }

    #[test]
    fn a3_short_circuits_small_sets() {
        let c = chat(ChatMode::Append);
        let p = build_payload(
            Strategy::TopRankedEntities,
            &info(&["a", "b"], &[]),
            ctx(None),
            &c,
        )
        .unwrap();
        assert_eq!(p.items, ["a", "b"]);
        assert!(p.ranking_trace.is_none());
        assert_eq!(c.stats().backend_calls(), 0);
    }

    #[test]
    fn a3_ranks_larger_sets() {
        let c = canned_chat(
            r#"{"ranked_entities": ["d", "b", "a", "c"], "top_3_entities": ["d", "b", "a"]}"#,
        );
        let p = build_payload(
            Strategy::TopRankedEntities,
            &info(&["a", "b", "c", "d"], &[]),
            ctx(None),
            &c,
        )
        .unwrap();
        assert_eq!(p.items, ["d", "b", "a"]);
        assert_eq!(p.ranking_trace.unwrap().ranked, ["d", "b", "a", "c"]);
        assert_eq!(c.stats().backend_calls(), 1);
    }

    #[test]
    fn a3_parse_failure_is_an_error() {
        let c = canned_chat("I cannot rank these.");
        let err = build_payload(
            Strategy::TopRankedEntities,
            &info(&["a", "b", "c", "d"], &[]),
            ctx(None),
            &c,
        )
        .unwrap_err();
        assert!(matches!(err, StrategyError::RankingParse(_)));
    }

    #[test]
    fn random_strategies_need_a_seed() {
        let err = build_payload(
            Strategy::RandomThreeEntities,
            &info(&["a"], &[]),
            ctx(None),
            &chat(ChatMode::Echo),
        )
        .unwrap_err();
        assert_eq!(
            err,
            StrategyError::MissingSeed(Strategy::RandomThreeEntities)
        );
    }

    #[test]
    fn a5_pinned_subset() {
        // Frozen from a reference run of SplitMix64 + partial Fisher-Yates,
        // seed = derive_seed(42, "doc-1", "A5").
        let p = build_payload(
            Strategy::RandomKEntities,
            &info(&["a", "b", "c"], &["x", "y"]),
            ctx(Some(42)),
            &chat(ChatMode::Echo),
        )
        .unwrap();
        assert_eq!(p.seed, Some(A5_SEED));
        assert_eq!(p.items, A5_ITEMS);
    }

    const A5_SEED: u64 = 13302634804866784745;
    const A5_ITEMS: [&str; 2] = ["a", "c"];

    #[test]
    fn random_sizes_clamp() {
        let c = chat(ChatMode::Echo);
        let five = info(&["a", "b", "c", "d", "e"], &["w"]);
        let two = info(&["a", "b"], &["w", "x", "y", "z"]);
        let a4 = |i: &MissingInfo| {
            build_payload(Strategy::RandomThreeEntities, i, ctx(Some(1)), &c)
                .unwrap()
                .items
                .len()
        };
        let a5 = |i: &MissingInfo| {
            build_payload(Strategy::RandomKEntities, i, ctx(Some(1)), &c)
                .unwrap()
                .items
                .len()
        };
        assert_eq!(a4(&five), 3);
        assert_eq!(a4(&two), 2);
        assert_eq!(a5(&five), 1);
        assert_eq!(a5(&two), 2);
    }

    #[test]
    fn parse_tolerates_fences_and_prose() {
        let entities: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let plain = r#"{"ranked_entities": ["b","a","c"], "top_3_entities": ["b","a","c"]}"#;
        let fenced = format!("Here you go:\n```json\n{plain}\n```\nHope this helps {{:");
        let expected = Ranking {
            ranked: vec!["b".into(), "a".into(), "c".into()],
            top3: vec!["b".into(), "a".into(), "c".into()],
        };
        assert_eq!(parse_ranking(plain, &entities).unwrap(), expected);
        assert_eq!(parse_ranking(&fenced, &entities).unwrap(), expected);
    }

    #[test]
    fn parse_drops_unknowns_and_pads_top3() {
        let entities: Vec<String> = ["gout", "rheumatoid arthritis", "lupus", "nsaids"]
            .map(String::from)
            .to_vec();
        let reply = r#"{"ranked_entities": ["Lupus", "aspirin", "Rheumatoid  Arthritis", "lupus", "gout"], "top_3_entities": ["lupus"]}"#;
        let r = parse_ranking(reply, &entities).unwrap();
        assert_eq!(r.ranked, ["lupus", "rheumatoid arthritis", "gout"]);
        assert_eq!(r.top3, ["lupus", "rheumatoid arthritis", "gout"]);

        let reply = r#"{"ranked_entities": ["gout", "lupus", "nsaids", "rheumatoid arthritis"], "top_3_entities": ["nsaids", "gout", "lupus", "rheumatoid arthritis"]}"#;
        assert_eq!(
            parse_ranking(reply, &entities).unwrap().top3,
            ["nsaids", "gout", "lupus"]
        );
    }

    #[test]
    fn parse_failures() {
        let entities = vec!["a".to_string()];
        assert!(matches!(
            parse_ranking("I cannot rank these.", &entities),
            Err(StrategyError::RankingParse(_))
        ));
        assert!(matches!(
            parse_ranking(r#"{"ranked_entities": ["zzz"]}"#, &entities),
            Err(StrategyError::RankingParse(_))
        ));
        assert!(matches!(
            parse_ranking(r#"{"ranked_entities": "a"}"#, &entities),
            Err(StrategyError::RankingParse(_))
        ));
    }

    #[test]
    fn json_extraction_skips_unparseable_braces() {
        let text = r#"{oops} then {"a": "}{", "b": {"c": 1}} trailing"#;
        let obj = extract_json_object(text).unwrap();
        assert_eq!(obj["a"], "}{");
        assert_eq!(obj["b"]["c"], 1);
        assert!(extract_json_object("no braces").is_none());
        assert!(extract_json_object("{unclosed").is_none());
    }

    #[test]
    fn regenerate_short_circuits_empty_payload() {
        let c = chat(ChatMode::Append);
        let payload = InsertionPayload {
            strategy: Strategy::AllEntities,
            items: vec![],
            seed: None,
            ranking_trace: None,
        };
        assert_eq!(
            regenerate(&c, "orig", "simple.", &payload).unwrap(),
            "simple."
        );
        assert_eq!(c.stats().backend_calls(), 0);
    }

    #[test]
    fn regenerate_with_mocks() {
        let payload = InsertionPayload {
            strategy: Strategy::AllEntities,
            items: vec!["methotrexate".into()],
            seed: None,
            ranking_trace: None,
        };
        let simplified = "Your joints may hurt.";
        assert_eq!(
            regenerate(&chat(ChatMode::Append), "orig", simplified, &payload).unwrap(),
            "Your joints may hurt. methotrexate"
        );
        assert_eq!(
            regenerate(&chat(ChatMode::Echo), "orig", simplified, &payload).unwrap(),
            simplified
        );
    }

    #[test]
    fn mock_rank_through_prompt() {
        let original = "Methotrexate treats rheumatoid arthritis. NSAIDs and steroids ease gout.";
        let entities: Vec<String> = ["gout", "methotrexate", "nsaids", "rheumatoid arthritis"]
            .map(String::from)
            .to_vec();
        let r = rank_entities(&chat(ChatMode::Append), original, "Simple.", &entities).unwrap();
        assert_eq!(
            r.ranked,
            ["methotrexate", "rheumatoid arthritis", "nsaids", "gout"]
        );
        assert_eq!(r.top3, ["methotrexate", "rheumatoid arthritis", "nsaids"]);
    }

    #[test]
    fn template_chat_can_fail_ranking() {
        let c = ChatClient(Client::new(
            Capability::Chat,
            "m",
            Arc::new(MockBackend::Chat(MockChat::template(BTreeMap::new(), None))),
        ));
        let err = rank_entities(&c, "o", "s", &["a".to_string()]).unwrap_err();
        assert!(matches!(
            err,
            StrategyError::Provider(ProviderError::Rejected { status: 404, .. })
        ));
    }
}
