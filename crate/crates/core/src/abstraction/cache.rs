//! Persisted prompt → response map for offline, deterministic runs.
//!
//! On disk: one record per line, `<sha256 hex of prompt>\t<base64 response>`,
//! sorted by fingerprint.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use sha2::{Digest, Sha256};

use super::llm::{Completer, CompletionError};
use crate::fsio::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt cache line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// Content hash of the full prompt text.
pub fn fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayCache {
    entries: BTreeMap<String, String>,
}

impl ReplayCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn record(&mut self, fingerprint: impl Into<String>, response: impl Into<String>) {
        self.entries.insert(fingerprint.into(), response.into());
    }

    pub fn lookup(&self, fingerprint: &str) -> Option<&str> {
        self.entries.get(fingerprint).map(String::as_str)
    }

    pub fn lookup_prompt(&self, prompt: &str) -> Option<&str> {
        self.lookup(&fingerprint(prompt))
    }

    pub fn merge(&mut self, other: ReplayCache) {
        self.entries.extend(other.entries);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (fp, resp) in &self.entries {
            out.push_str(fp);
            out.push('\t');
            out.push_str(&STANDARD.encode(resp.as_bytes()));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CacheError> {
        Self::read(BufReader::new(text.as_bytes()))
    }

    fn read<R: BufRead>(reader: R) -> Result<Self, CacheError> {
        let mut cache = ReplayCache::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let corrupt = |reason: &str| CacheError::Corrupt {
                line: lineno,
                reason: reason.to_string(),
            };
            let (fp, body) = line.split_once('\t').ok_or_else(|| corrupt("missing tab separator"))?;
            if fp.len() != 64 || !fp.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(corrupt("fingerprint is not a sha256 hex digest"));
            }
            let bytes = STANDARD
                .decode(body)
                .map_err(|e| corrupt(&format!("bad base64: {e}")))?;
            let text = String::from_utf8(bytes).map_err(|_| corrupt("response is not utf-8"))?;
            cache.record(fp, text);
        }
        Ok(cache)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CacheError> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())?;
        Ok(())
    }
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<ReplayCache, CacheError> {
    let file = fs::File::open(path)?;
    ReplayCache::read(BufReader::new(file))
}

pub fn record_cache(cache: &mut ReplayCache, fingerprint: &str, response: &str) {
    cache.record(fingerprint, response);
}

/// Answers only from a cache. A miss is an error, never a passthrough.
#[derive(Debug)]
pub struct ReplayCompleter {
    cache: ReplayCache,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ReplayCompleter {
    pub fn new(cache: ReplayCache) -> Self {
        ReplayCompleter {
            cache,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

impl Completer for ReplayCompleter {
    fn backend_id(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let fp = fingerprint(prompt);
        match self.cache.lookup(&fp) {
            Some(text) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Ok(text.to_string())
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                Err(CompletionError::ReplayMiss { fingerprint: fp })
            }
        }
    }

    fn calls(&self) -> u64 {
        self.hits() + self.misses()
    }
}

/// Wraps a live completer and records every response it produces. Cached
/// prompts are answered without calling the inner completer.
pub struct RecordingCompleter {
    inner: Arc<dyn Completer>,
    cache: Arc<Mutex<ReplayCache>>,
}

impl RecordingCompleter {
    pub fn new(inner: Arc<dyn Completer>, cache: Arc<Mutex<ReplayCache>>) -> Self {
        RecordingCompleter { inner, cache }
    }

    pub fn cache(&self) -> Arc<Mutex<ReplayCache>> {
        Arc::clone(&self.cache)
    }
}

impl Completer for RecordingCompleter {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let fp = fingerprint(prompt);
        if let Some(hit) = self.cache.lock().expect("cache lock").lookup(&fp) {
            return Ok(hit.to_string());
        }
        let response = self.inner.complete(prompt)?;
        self.cache.lock().expect("cache lock").record(fp, response.clone());
        Ok(response)
    }

    fn calls(&self) -> u64 {
        self.inner.calls()
    }
}
