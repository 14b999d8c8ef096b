//! Ranking metrics over DIRECT evidence: Recall@K, Hit@K, reciprocal rank.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::ChunkId;
use crate::scored::ScoredList;

use super::EvalError;

/// Metrics for a single ranked list against a DIRECT set.
///
/// `recall_at[K]` is the fraction of DIRECT evidence in the top K;
/// `hit_at[K]` is 1.0 iff at least one DIRECT chunk is in the top K;
/// `reciprocal_rank` is 1/rank of the first DIRECT chunk (0 when none is
/// retrieved at all). Averaging reciprocal ranks across queries gives MRR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub recall_at: BTreeMap<usize, f64>,
    pub hit_at: BTreeMap<usize, f64>,
    pub reciprocal_rank: f64,
}

pub fn retrieval_metrics(
    ranked: &ScoredList,
    direct_ids: &BTreeSet<ChunkId>,
    ks: &[usize],
) -> Result<RetrievalMetrics, EvalError> {
    if direct_ids.is_empty() {
        return Err(EvalError::EmptyDirectSet);
    }
    let ranked_ids: Vec<&ChunkId> = ranked.ids().collect();
    let mut recall_at = BTreeMap::new();
    let mut hit_at = BTreeMap::new();
    for &k in ks {
        let hits = ranked_ids
            .iter()
            .take(k)
            .filter(|id| direct_ids.contains(**id))
            .count();
        recall_at.insert(k, hits as f64 / direct_ids.len() as f64);
        hit_at.insert(k, if hits > 0 { 1.0 } else { 0.0 });
    }
    let reciprocal_rank = ranked_ids
        .iter()
        .position(|id| direct_ids.contains(*id))
        .map_or(0.0, |pos| 1.0 / (pos as f64 + 1.0));
    Ok(RetrievalMetrics {
        recall_at,
        hit_at,
        reciprocal_rank,
    })
}
