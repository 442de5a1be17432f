use std::ops::Range;

use serde::{Deserialize, Serialize};

/// A word as it appeared in the text, plus its lowercased form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
}

impl Token {
    fn new(surface: &str) -> Self {
        Token {
            surface: surface.to_string(),
            normalized: surface.to_lowercase(),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// Byte ranges of every token in `text`.
///
/// A token is a maximal run of letters, digits and apostrophes, where a
/// hyphen is kept only when it sits between two such characters.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut chars = text.char_indices().peekable();

    while let Some((idx, c)) = chars.next() {
        if is_word_char(c) {
            start.get_or_insert(idx);
            continue;
        }
        let next_is_word = chars.peek().is_some_and(|&(_, n)| is_word_char(n));
        if c == '-' && start.is_some() && next_is_word {
            continue;
        }
        if let Some(s) = start.take() {
            spans.push(s..idx);
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

pub fn tokenize(text: &str) -> Vec<Token> {
    token_spans(text)
        .into_iter()
        .map(|span| Token::new(&text[span]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ... !! ").is_empty());
    }

    #[test]
    fn punctuation_is_a_separator() {
        assert_eq!(
            surfaces("Aspirin reduces pain."),
            ["Aspirin", "reduces", "pain"]
        );
    }

    #[test]
    fn internal_hyphen_kept_parentheses_dropped() {
        assert_eq!(
            surfaces("anti-inflammatory drugs (NSAIDs)"),
            ["anti-inflammatory", "drugs", "NSAIDs"]
        );
    }

    #[test]
    fn dangling_hyphens_split() {
        assert_eq!(surfaces("-pre post- a--b"), ["pre", "post", "a", "b"]);
    }

    #[test]
    fn apostrophes_and_digits() {
        assert_eq!(
            surfaces("don't take 20mg, it's Crohn’s"),
            ["don't", "take", "20mg", "it's", "Crohn’s"]
        );
    }

    #[test]
    fn normalized_is_lowercase() {
        let tokens = tokenize("NSAIDs Über");
        assert_eq!(tokens[0].normalized, "nsaids");
        assert_eq!(tokens[1].normalized, "über");
    }

    #[test]
    fn spans_index_the_source() {
        let text = "Methotrexate treats rheumatoid arthritis.";
        let spans = token_spans(text);
        assert_eq!(&text[spans[2].clone()], "rheumatoid");
        assert_eq!(spans[3], 31..40);
    }
}
