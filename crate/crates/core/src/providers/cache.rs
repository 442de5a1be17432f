use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde_json::Value;

use super::CacheKey;

/// Content-addressed response cache on disk.
///
/// Each entry is one file at `<root>/<first two hex digits>/<digest>.json`.
/// Writes go through a temporary file in the same directory followed by a
/// rename, so a reader never sees a partial entry. Concurrent writers of the
/// same key write equal content, so the last rename wins harmlessly.
#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DiskCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, key: &CacheKey) -> PathBuf {
        let hex = key.to_hex();
        self.root.join(&hex[..2]).join(format!("{hex}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Option<Value> {
        let path = self.entry_path(key);
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(v) => Some(v),
            Err(e) => {
                warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, key: &CacheKey, value: &Value) -> std::io::Result<()> {
        let path = self.entry_path(key);
        let dir = path.parent().expect("entry path has a shard directory");
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer(&mut tmp, value)?;
        tmp.flush()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}
