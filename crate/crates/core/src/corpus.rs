//! Chunked guideline corpus: loading, validation and lookup.
//!
//! The corpus file is JSONL, one chunk per line, UTF-8:
//!
//! ```text
//! {"id":"c01","text":"...","source_doc":"anc-guide","language":"en","section_title":"Nutrition"}
//! ```
//!
//! Loading is strict-fail: a duplicate id or an empty text field aborts with
//! the offending line number rather than silently replacing a record, because
//! benchmark gold labels reference chunk ids.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque chunk identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(String);

impl ChunkId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChunkId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// One guideline passage — the atom of indexing, retrieval and benchmark
/// labeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: ChunkId,
    pub text: String,
    pub source_doc: String,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_title: Option<String>,
}

/// Language tags accepted in corpus records by default.
pub const DEFAULT_CORPUS_LANGUAGES: &[&str] = &["en", "hi", "as", "und"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate chunk id \"{id}\"")]
    DuplicateId { id: ChunkId, line: usize },
    #[error("line {line}: empty text field for chunk id \"{id}\"")]
    EmptyText { id: ChunkId, line: usize },
    #[error("line {line}: language tag \"{tag}\" not in the configured set")]
    UnknownLanguage { line: usize, tag: String },
}

/// Immutable, order-preserving collection of chunks with id lookup.
///
/// Safe to share across concurrent readers once loaded; iteration order is
/// the file order, stable across runs for the same input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChunkStore {
    chunks: Vec<Chunk>,
    by_id: HashMap<ChunkId, usize>,
}

impl ChunkStore {
    /// Assemble a store from in-memory chunks, enforcing the same invariants
    /// as file loading (duplicate ids and empty text rejected; the reported
    /// "line" is the 1-based position in the input sequence).
    pub fn from_chunks<I: IntoIterator<Item = Chunk>>(chunks: I) -> Result<Self, CorpusError> {
        let mut store = ChunkStore::default();
        for (i, chunk) in chunks.into_iter().enumerate() {
            store.insert(chunk, i + 1, None)?;
        }
        Ok(store)
    }

    fn insert(
        &mut self,
        chunk: Chunk,
        line: usize,
        languages: Option<&[&str]>,
    ) -> Result<(), CorpusError> {
        if chunk.text.trim().is_empty() {
            return Err(CorpusError::EmptyText { id: chunk.id, line });
        }
        if let Some(langs) = languages {
            if !langs.contains(&chunk.language.as_str()) {
                return Err(CorpusError::UnknownLanguage {
                    line,
                    tag: chunk.language,
                });
            }
        }
        if self.by_id.contains_key(&chunk.id) {
            return Err(CorpusError::DuplicateId { id: chunk.id, line });
        }
        self.by_id.insert(chunk.id.clone(), self.chunks.len());
        self.chunks.push(chunk);
        Ok(())
    }

    pub fn get(&self, id: &ChunkId) -> Option<&Chunk> {
        self.by_id.get(id).map(|&i| &self.chunks[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Chunk> {
        self.chunks.iter()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ChunkId> {
        self.chunks.iter().map(|c| &c.id)
    }

    /// Serialize back to JSONL, field-by-field identical to what
    /// [`load_corpus`] accepts (used by the round-trip tests and snapshots).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for chunk in &self.chunks {
            out.push_str(&serde_json::to_string(chunk).expect("chunk serializes"));
            out.push('\n');
        }
        out
    }
}

/// Load a JSONL corpus file, validating each record against the default
/// language set. Empty files yield an empty store; index builders reject
/// those downstream.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<ChunkStore, CorpusError> {
    load_corpus_with_languages(path, DEFAULT_CORPUS_LANGUAGES)
}

/// As [`load_corpus`] but with an explicit accepted-language set.
pub fn load_corpus_with_languages(
    path: impl AsRef<Path>,
    languages: &[&str],
) -> Result<ChunkStore, CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut store = ChunkStore::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let raw = line?;
        if raw.trim().is_empty() {
            continue;
        }
        let chunk: Chunk = serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        store.insert(chunk, line_no, Some(languages))?;
    }
    Ok(store)
}

/// Parse a corpus from an in-memory JSONL string (used by the wasm demo,
/// which embeds its fixtures).
pub fn parse_corpus(jsonl: &str) -> Result<ChunkStore, CorpusError> {
    let mut store = ChunkStore::default();
    for (idx, raw) in jsonl.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let chunk: Chunk = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        store.insert(chunk, line_no, Some(DEFAULT_CORPUS_LANGUAGES))?;
    }
    Ok(store)
}
