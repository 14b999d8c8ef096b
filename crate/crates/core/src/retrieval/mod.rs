//! Hybrid candidate generation and reranking.
//!
//! The pipeline composes, in order: dense retrieval (original-language query,
//! depth `k_dense`), BM25 over all non-zero-score documents, reciprocal rank
//! fusion at constant `k_rrf`, deduplication, cross-encoder-style reranking of
//! the top `k_rerank` (English view), and final truncation to `k_context`
//! evidence chunks. Every intermediate list lands in the provenance trace.

mod bm25;
mod dense;
mod fuse;

pub use bm25::{build_bm25_index, bm25_retrieve, SparseIndex};
pub use dense::{build_dense_index, dense_retrieve, DenseIndex};
pub use fuse::{rrf_fuse, rerank};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{EmbeddingProvider, ProviderError, RerankScorer};
use crate::scored::{ScoredList, ScoredListError};
use crate::stage::LifeStage;

/// Retrieval depths and BM25 parameters. Defaults are the deployed run
/// configuration; BM25 `k1`/`b` are the textbook defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k_dense: usize,
    pub k_rrf: usize,
    pub k_rerank: usize,
    /// Evidence chunks handed to the generator (top reranked passages).
    pub k_context: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k_dense: 15,
            k_rrf: 60,
            k_rerank: 7,
            k_context: 7,
            bm25_k1: 1.2,
            bm25_b: 0.75,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k_dense == 0
            || self.k_rrf == 0
            || self.k_rerank == 0
            || self.k_context == 0
            || self.bm25_k1 <= 0.0
            || self.bm25_b < 0.0
            || self.bm25_b > 1.0
        {
            return Err(RetrievalError::BadConfig(format!("{self:?}")));
        }
        if self.k_context > self.k_rerank {
            return Err(RetrievalError::BadConfig(format!(
                "k_context {} exceeds k_rerank {}",
                self.k_context, self.k_rerank
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build index over an empty store")]
    EmptyStore,
    #[error("invalid retrieval config: {0}")]
    BadConfig(String),
    #[error("embedding dimension mismatch: index {index}, provider {provider}")]
    DimensionMismatch { index: usize, provider: usize },
    #[error("rerank candidates empty")]
    EmptyCandidates,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Scored(#[from] ScoredListError),
}

/// Per-stage record of the full retrieval composition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalTrace {
    /// Query string consumed by the dense retriever (always the original).
    pub dense_query: String,
    /// Query string consumed by BM25 (always the original).
    pub sparse_query: String,
    /// Query string consumed by the reranker (the English view), when run.
    pub rerank_query: Option<String>,
    /// Stage threaded through for provenance; chunks carry no stage metadata,
    /// so no filtering is applied.
    pub stage: LifeStage,
    pub dense: ScoredList,
    pub sparse: ScoredList,
    pub fused: ScoredList,
    pub deduped: ScoredList,
    pub reranked: Option<ScoredList>,
    /// True when the rerank scorer failed and the fused order was used.
    pub rerank_fallback: bool,
    pub final_top_k: ScoredList,
}

/// Prebuilt indexes shared across requests.
pub struct Indexes {
    pub sparse: SparseIndex,
    pub dense: DenseIndex,
}

/// End-to-end candidate generation: dense + sparse → RRF → dedup → rerank →
/// top-K. `reranker: None` disables the rerank stage (final order = fused);
/// a failing scorer falls back to fused order with a trace flag rather than
/// aborting the request.
pub fn retrieve_and_rerank(
    query: &str,
    query_en: Option<&str>,
    stage: LifeStage,
    config: &RetrievalConfig,
    indexes: &Indexes,
    embedder: &dyn EmbeddingProvider,
    reranker: Option<&dyn RerankScorer>,
    store: &crate::corpus::ChunkStore,
) -> Result<(ScoredList, RetrievalTrace), RetrievalError> {
    config.validate()?;
    let dense = dense_retrieve(&indexes.dense, query, config.k_dense, embedder)?;
    let sparse = bm25_retrieve(&indexes.sparse, query, usize::MAX);
    let fused = rrf_fuse(&[dense.clone(), sparse.clone()], config.k_rrf)?;
    let deduped = fused.deduplicate();
    let candidates = deduped.truncated(config.k_rerank.max(config.k_context));

    let mut rerank_fallback = false;
    let mut rerank_query = None;
    let reranked = match (reranker, query_en) {
        (Some(scorer), Some(en)) if !candidates.is_empty() => {
            rerank_query = Some(en.to_string());
            match rerank(scorer, en, &candidates, config.k_rerank, store) {
                Ok(list) => Some(list),
                Err(RetrievalError::Provider(_)) => {
                    rerank_fallback = true;
                    None
                }
                Err(e) => return Err(e),
            }
        }
        _ => None,
    };

    let final_top_k = reranked
        .clone()
        .unwrap_or_else(|| deduped.clone())
        .truncated(config.k_context);

    let trace = RetrievalTrace {
        dense_query: query.to_string(),
        sparse_query: query.to_string(),
        rerank_query,
        stage,
        dense,
        sparse,
        fused,
        deduped,
        reranked,
        rerank_fallback,
        final_top_k: final_top_k.clone(),
    };
    Ok((final_top_k, trace))
}
