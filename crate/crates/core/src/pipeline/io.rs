//! JSONL corpus and results files.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Document, DocumentResult};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: no records")]
    Empty(PathBuf),
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    if out.is_empty() {
        return Err(CorpusError::Empty(path.to_path_buf()));
    }
    Ok(out)
}

/// Read a corpus: one `{"id", "text", "simplified"?}` object per line.
/// Ids must be unique and texts non-empty.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (line, doc) in read_jsonl::<Document>(path)? {
        let problem = if doc.id.trim().is_empty() {
            Some("empty id".to_string())
        } else if doc.text.trim().is_empty() {
            Some(format!("document {} has empty text", doc.id))
        } else if !seen.insert(doc.id.clone()) {
            Some(format!("duplicate id {}", doc.id))
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                line,
                message,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_results(path: &Path) -> Result<Vec<DocumentResult>, CorpusError> {
    let records = read_jsonl::<DocumentResult>(path)?;
    for (line, r) in &records {
        if r.schema_version != RESULTS_SCHEMA_VERSION {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("unsupported schema_version {}", r.schema_version),
            });
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn results_to_jsonl(results: &[DocumentResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r).expect("results serialize"));
        out.push('\n');
    }
    out
}

/// Write results atomically.
pub fn write_results(path: &Path, results: &[DocumentResult]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(results_to_jsonl(results).as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> PathBuf {
        let path = dir.path().join("corpus.jsonl");
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn reads_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "{\"id\":\"a\",\"text\":\"One.\"}\n\n{\"id\":\"b\",\"text\":\"Two.\",\"simplified\":\"2.\"}\n",
        );
        let docs = read_corpus(&path).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].simplified.as_deref(), Some("2."));
    }

    #[test]
    fn rejects_bad_corpora() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write(
            &dir,
            "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n",
        );
        assert!(matches!(
            read_corpus(&dup),
            Err(CorpusError::Parse { line: 2, .. })
        ));
        let empty = write(&dir, "\n");
        assert!(matches!(read_corpus(&empty), Err(CorpusError::Empty(_))));
        let blank = write(&dir, "{\"id\":\"a\",\"text\":\" \"}\n");
        assert!(read_corpus(&blank).is_err());
        let junk = write(&dir, "not json\n");
        assert!(matches!(
            read_corpus(&junk),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_corpus(&dir.path().join("nope")),
            Err(CorpusError::Io { .. })
        ));
    }
}
