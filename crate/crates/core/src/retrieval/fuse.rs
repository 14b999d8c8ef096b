//! Reciprocal rank fusion and reranking.

use std::collections::BTreeMap;

use crate::corpus::{ChunkId, ChunkStore};
use crate::providers::RerankScorer;
use crate::scored::ScoredList;

use super::RetrievalError;

/// Fuse ranked lists: each chunk's fused score is the sum over lists
/// containing it of `1 / (rank + k_rrf)` with 1-based ranks. Output is
/// descending with the usual chunk-id tie-break. Individual lists may be
/// empty; fusing a single list is a monotone transform of its ranks and
/// preserves its order.
pub fn rrf_fuse(lists: &[ScoredList], k_rrf: usize) -> Result<ScoredList, RetrievalError> {
    let mut fused: BTreeMap<ChunkId, f64> = BTreeMap::new();
    for list in lists {
        for (i, entry) in list.entries().iter().enumerate() {
            let rank = i + 1;
            *fused.entry(entry.chunk_id.clone()).or_insert(0.0) +=
                1.0 / (rank as f64 + k_rrf as f64);
        }
    }
    Ok(ScoredList::from_scores(fused)?)
}

/// Rescore candidates with the joint query–passage scorer and keep the top
/// `k_rerank`. Candidate chunk ids must resolve in the store; a scorer
/// failure surfaces as a provider error (callers fall back to fused order).
pub fn rerank(
    scorer: &dyn RerankScorer,
    query_en: &str,
    candidates: &ScoredList,
    k_rerank: usize,
    store: &ChunkStore,
) -> Result<ScoredList, RetrievalError> {
    if candidates.is_empty() {
        return Err(RetrievalError::EmptyCandidates);
    }
    let mut rescored = Vec::with_capacity(candidates.len());
    for entry in candidates.entries() {
        let text = store
            .get(&entry.chunk_id)
            .map(|c| c.text.as_str())
            .unwrap_or_default();
        let score = scorer.score(query_en, text)?;
        rescored.push((entry.chunk_id.clone(), score));
    }
    Ok(ScoredList::from_scores(rescored)?.truncated(k_rerank))
}
