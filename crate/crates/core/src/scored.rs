//! `ScoredList` — the common currency of sparse retrieval, dense retrieval,
//! fusion and reranking.
//!
//! Entries are always held in descending score order with ties broken by
//! chunk id ascending, so every operation downstream of a `ScoredList` is
//! deterministic regardless of input order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ChunkId;

/// One ranked entry: a chunk id and its score under the producing operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub chunk_id: ChunkId,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum ScoredListError {
    #[error("duplicate chunk id in scored list: {0}")]
    DuplicateId(ChunkId),
    #[error("non-finite score {score} for chunk id {chunk_id}")]
    NonFiniteScore { chunk_id: ChunkId, score: f64 },
    #[error("ordering invariant violated at chunk id {0}")]
    OutOfOrder(ChunkId),
}

/// An ordered list of `(chunk_id, score)` pairs.
///
/// Invariants (enforced at construction, checkable via [`ScoredList::validate`]):
/// no duplicate chunk ids, all scores finite, entries sorted by descending
/// score with ties broken by chunk id ascending.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredList {
    entries: Vec<ScoredEntry>,
}

impl ScoredList {
    /// Build a list from arbitrary `(id, score)` pairs, sorting and checking
    /// the invariants.
    pub fn from_scores<I>(pairs: I) -> Result<Self, ScoredListError>
    where
        I: IntoIterator<Item = (ChunkId, f64)>,
    {
        let mut entries: Vec<ScoredEntry> = pairs
            .into_iter()
            .map(|(chunk_id, score)| ScoredEntry { chunk_id, score })
            .collect();
        for e in &entries {
            if !e.score.is_finite() {
                return Err(ScoredListError::NonFiniteScore {
                    chunk_id: e.chunk_id.clone(),
                    score: e.score,
                });
            }
        }
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        for w in entries.windows(2) {
            if w[0].chunk_id == w[1].chunk_id {
                return Err(ScoredListError::DuplicateId(w[0].chunk_id.clone()));
            }
        }
        // Adjacent check above only catches duplicates that tie on score;
        // a full pass catches the rest.
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.chunk_id.clone()) {
                return Err(ScoredListError::DuplicateId(e.chunk_id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ScoredEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ChunkId> {
        self.entries.iter().map(|e| &e.chunk_id)
    }

    pub fn contains(&self, id: &ChunkId) -> bool {
        self.entries.iter().any(|e| &e.chunk_id == id)
    }

    /// 1-based rank of a chunk id, if present.
    pub fn rank_of(&self, id: &ChunkId) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| &e.chunk_id == id)
            .map(|p| p + 1)
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self {
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }

    /// First occurrence per chunk id kept, order otherwise preserved.
    ///
    /// On a list holding the ordering invariant this is a no-op; it exists so
    /// fused pools assembled from multiple sources can be squashed explicitly.
    pub fn deduplicate(&self) -> Self {
        let mut seen = std::collections::HashSet::new();
        let entries = self
            .entries
            .iter()
            .filter(|e| seen.insert(e.chunk_id.clone()))
            .cloned()
            .collect();
        Self { entries }
    }

    /// Check the ordering invariant: descending scores, ties by chunk id
    /// ascending, no duplicates, finite scores.
    pub fn validate(&self) -> Result<(), ScoredListError> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !e.score.is_finite() {
                return Err(ScoredListError::NonFiniteScore {
                    chunk_id: e.chunk_id.clone(),
                    score: e.score,
                });
            }
            if !seen.insert(e.chunk_id.clone()) {
                return Err(ScoredListError::DuplicateId(e.chunk_id.clone()));
            }
        }
        for w in self.entries.windows(2) {
            let ok = w[0].score > w[1].score
                || (w[0].score == w[1].score && w[0].chunk_id < w[1].chunk_id);
            if !ok {
                return Err(ScoredListError::OutOfOrder(w[1].chunk_id.clone()));
            }
        }
        Ok(())
    }
}

impl FromIterator<(ChunkId, f64)> for ScoredList {
    /// Panics on duplicate ids or non-finite scores; intended for fixtures.
    fn from_iter<I: IntoIterator<Item = (ChunkId, f64)>>(iter: I) -> Self {
        Self::from_scores(iter).expect("invalid scored list literal")
    }
}
