//! BM25 inverted index and retrieval.
//!
//! Scoring uses the non-negative idf variant
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` with the usual
//! term-frequency saturation
//! `tf·(k1+1) / (tf + k1·(1 - b + b·dl/avgdl))`, so documents matching any
//! query term always score above zero and "zero-score documents excluded"
//! is exactly "documents matching no query term".

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{ChunkId, ChunkStore};
use crate::providers::tokenize;
use crate::scored::ScoredList;

use super::{RetrievalConfig, RetrievalError};

/// One posting: document position in the index's id table plus term
/// frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index with document-frequency and length statistics.
/// Immutable after build; posting lists are in document order, and the
/// vocabulary map is ordered so rebuilds are bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseIndex {
    pub ids: Vec<ChunkId>,
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_lengths: Vec<u32>,
    pub avgdl: f64,
    pub k1: f64,
    pub b: f64,
}

/// Build the inverted index over tokenized chunk texts.
pub fn build_bm25_index(
    store: &ChunkStore,
    config: &RetrievalConfig,
) -> Result<SparseIndex, RetrievalError> {
    if store.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    let mut ids = Vec::with_capacity(store.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(store.len());
    for (doc, chunk) in store.iter().enumerate() {
        ids.push(chunk.id.clone());
        let tokens = tokenize(&chunk.text);
        doc_lengths.push(tokens.len() as u32);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting {
                doc: doc as u32,
                tf,
            });
        }
    }
    let avgdl = doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64;
    Ok(SparseIndex {
        ids,
        postings,
        doc_lengths,
        avgdl,
        k1: config.bm25_k1,
        b: config.bm25_b,
    })
}

impl SparseIndex {
    pub fn doc_count(&self) -> usize {
        self.ids.len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.postings.get(term).map_or(0, |p| p.len()) as f64;
        let n = self.doc_count() as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }
}

/// Top-k documents by BM25 score; documents matching no query term are
/// excluded, an empty or out-of-vocabulary query yields an empty list.
/// Pass `usize::MAX` for k to keep every matching document (the hybrid
/// pipeline fuses the full sparse list and truncates later).
pub fn bm25_retrieve(index: &SparseIndex, query: &str, k: usize) -> ScoredList {
    let query_tokens = tokenize(query);
    if query_tokens.is_empty() {
        return ScoredList::empty();
    }
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for term in &query_tokens {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let idf = index.idf(term);
        for posting in postings {
            let dl = index.doc_lengths[posting.doc as usize] as f64;
            let tf = posting.tf as f64;
            let tf_norm = (tf * (index.k1 + 1.0))
                / (tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl));
            *scores.entry(posting.doc).or_insert(0.0) += idf * tf_norm;
        }
    }
    let list = ScoredList::from_scores(
        scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(doc, s)| (index.ids[doc as usize].clone(), s)),
    )
    .expect("doc ids are unique and scores finite");
    if k == usize::MAX {
        list
    } else {
        list.truncated(k)
    }
}
