//! Run configuration: a TOML file with command-line overrides layered on top.

use std::path::{Path, PathBuf};

use reinsert_core::metrics::{RougeConfig, RougeVariant};
use reinsert_core::providers::{
    CacheSettings, ChatSettings, EmbedSettings, NerSettings, ProvidersConfig, RetrySettings,
    SummarizeSettings,
};
use reinsert_core::strategies::Strategy;
use reinsert_core::text_analysis::RougePreprocess;
use serde::Deserialize;
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RougeSettings {
    pub variant: RougeVariant,
    pub preprocess: RougePreprocess,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub strategies: Vec<Strategy>,
    pub workers: usize,
    /// Simplification prompt template; the bundled one when unset.
    pub simplify_prompt: Option<PathBuf>,
    /// Stopword list, one word per line; the bundled one when unset.
    pub stopwords: Option<PathBuf>,
    pub rouge: RougeSettings,
    pub chat: ChatSettings,
    pub embed: EmbedSettings,
    pub ner: NerSettings,
    pub summarize: SummarizeSettings,
    pub retry: RetrySettings,
    pub cache: CacheSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            output_dir: PathBuf::from("results"),
            seed: None,
            strategies: Strategy::ALL.to_vec(),
            workers: 1,
            simplify_prompt: None,
            stopwords: None,
            rouge: RougeSettings::default(),
            chat: ChatSettings::default(),
            embed: EmbedSettings::default(),
            ner: NerSettings::default(),
            summarize: SummarizeSettings::default(),
            retry: RetrySettings::default(),
            cache: CacheSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn providers(&self) -> ProvidersConfig {
        ProvidersConfig {
            chat: self.chat.clone(),
            embed: self.embed.clone(),
            ner: self.ner.clone(),
            summarize: self.summarize.clone(),
            retry: self.retry.clone(),
            cache: self.cache.clone(),
        }
    }

    pub fn rouge(&self) -> RougeConfig {
        RougeConfig {
            variant: self.rouge.variant,
            preprocess: self.rouge.preprocess,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.strategies.is_empty() {
            return Err(CliError::Config("strategies must not be empty".into()));
        }
        if self.seed.is_none() && self.strategies.iter().any(|s| s.is_random()) {
            return Err(CliError::Config(
                "seed is required when A4 or A5 is enabled".into(),
            ));
        }
        if self.embed.dimension < 2 {
            return Err(CliError::Config(
                "embed.dimension must be at least 2".into(),
            ));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parse an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Set a dotted key such as `chat.mode` in `table`.
pub fn set_key(table: &mut toml::Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| CliError::Config(format!("bad key {key:?}")))?;
    let mut node = table;
    for part in parts {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {part} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Apply a `key=value` override.
pub fn apply_assignment(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got {assignment:?}")))?;
    set_key(table, key.trim(), parse_value(raw.trim()))
}

pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

pub fn from_table(table: toml::Table) -> Result<RunConfig, CliError> {
    RunConfig::deserialize(Value::Table(table))
        .map_err(|e| CliError::Config(e.message().to_string()))
}
