use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

/// The bundled English stopword list, one lowercase word per line.
pub const BUNDLED: &str = include_str!("../../data/stopwords_en.txt");

/// SHA-256 of [`BUNDLED`]. Changing the list changes every downstream count.
pub const BUNDLED_SHA256: &str = "019f104ba2ed07436d05f9cdd3383034ad66014edc27fc651f837e1a038b6451";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// Parse a list in the on-disk format. Blank lines are ignored and
    /// entries are lowercased.
    pub fn parse(contents: &str) -> Self {
        let words = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        Stopwords { words }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn bundled() -> &'static Stopwords {
        static LIST: OnceLock<Stopwords> = OnceLock::new();
        LIST.get_or_init(|| Stopwords::parse(BUNDLED))
    }

    pub fn contains(&self, lowercase_word: &str) -> bool {
        self.words.contains(lowercase_word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};

    #[test]
    fn bundled_list_is_pinned() {
        let digest = Sha256::digest(BUNDLED.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, BUNDLED_SHA256);
        assert_eq!(Stopwords::bundled().len(), 179);
    }

    #[test]
    fn membership() {
        let list = Stopwords::bundled();
        assert!(list.contains("the"));
        assert!(list.contains("don't"));
        assert!(!list.contains("aspirin"));
    }

    #[test]
    fn parse_skips_blank_lines_and_lowercases() {
        let list = Stopwords::parse("Foo\n\n  bar \n");
        assert_eq!(list.len(), 2);
        assert!(list.contains("foo"));
        assert!(list.contains("bar"));
    }
}
