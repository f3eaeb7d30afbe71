//! Content-addressed on-disk response cache.
//!
//! Layout: `<root>/<model_name>/<content_hash>.json`, one immutable file per
//! (model, prompt hash). Model runs cost real money; re-analysis with new
//! metrics or granularities must never re-query a backend for a prompt it
//! has already answered.

use std::fs;
use std::path::{Path, PathBuf};

use super::ModelResponse;

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> std::io::Result<ResponseCache> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(ResponseCache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, model_name: &str, content_hash: &str) -> PathBuf {
        self.root
            .join(sanitize(model_name))
            .join(format!("{content_hash}.json"))
    }

    /// Look up a cached response; unreadable or corrupt entries count as
    /// misses (and are logged) rather than aborting a run.
    pub fn get(&self, model_name: &str, content_hash: &str) -> Option<ModelResponse> {
        let path = self.entry_path(model_name, content_hash);
        let text = fs::read_to_string(&path).ok()?;
        match serde_json::from_str(&text) {
            Ok(resp) => Some(resp),
            Err(err) => {
                log::warn!("discarding corrupt cache entry {}: {err}", path.display());
                None
            }
        }
    }

    /// Persist a response. First write wins: an existing entry is immutable
    /// and left untouched. Writes go through a temp file + rename so readers
    /// never observe a partial entry.
    pub fn put(&self, model_name: &str, response: &ModelResponse) -> std::io::Result<()> {
        let path = self.entry_path(model_name, &response.content_hash);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("cache entry has a parent dir");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.tmp", response.content_hash));
        fs::write(&tmp, serde_json::to_vec(response)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;

    fn response(hash: &str, text: &str) -> ModelResponse {
        ModelResponse {
            content_hash: hash.to_string(),
            raw_text: text.to_string(),
            latency_ms: 12,
            token_usage: None,
            created_at: Utc::now(),
        }
    }

    #[test]
    fn roundtrips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let resp = response("abc123", "Writing: 3\nReading: NA");
        cache.put("gpt-4o", &resp).unwrap();
        let back = cache.get("gpt-4o", "abc123").unwrap();
        assert_eq!(back, resp);
    }

    #[test]
    fn first_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        cache.put("m", &response("h", "first")).unwrap();
        cache.put("m", &response("h", "second")).unwrap();
        assert_eq!(cache.get("m", "h").unwrap().raw_text, "first");
    }

    #[test]
    fn corrupt_entries_are_misses() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let model_dir = dir.path().join("m");
        fs::create_dir_all(&model_dir).unwrap();
        fs::write(model_dir.join("bad.json"), "not json").unwrap();
        assert!(cache.get("m", "bad").is_none());
    }

    #[test]
    fn model_names_are_sanitized_for_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        cache.put("org/model:v1", &response("h", "x")).unwrap();
        assert!(cache.get("org/model:v1", "h").is_some());
        assert!(dir.path().join("org_model_v1").is_dir());
    }
}
