//! Flat dense retrieval: exact cosine scan over provider embeddings.
//!
//! The index stores one unit vector per chunk; retrieval embeds the
//! original-language query and ranks by inner product. The flat scan is the
//! brute force, which pins correctness for any future index optimization.

use serde::{Deserialize, Serialize};

use crate::corpus::{ChunkId, ChunkStore};
use crate::providers::EmbeddingProvider;
use crate::scored::ScoredList;

use super::RetrievalError;

/// Chunk embeddings in store order, all unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseIndex {
    pub dim: usize,
    /// Provider identifier echoed into snapshots for compatibility checks.
    pub provider_id: String,
    pub ids: Vec<ChunkId>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn build_dense_index(
    store: &ChunkStore,
    provider: &dyn EmbeddingProvider,
) -> Result<DenseIndex, RetrievalError> {
    if store.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    let mut ids = Vec::with_capacity(store.len());
    let mut vectors = Vec::with_capacity(store.len());
    for chunk in store.iter() {
        ids.push(chunk.id.clone());
        vectors.push(provider.embed(&chunk.text)?);
    }
    Ok(DenseIndex {
        dim: provider.dimension(),
        provider_id: provider.id(),
        ids,
        vectors,
    })
}

/// Top-k by cosine similarity (inner product of normalized vectors), exact.
/// A query with no tokens yields an empty list; a provider whose dimension
/// disagrees with the index is rejected.
pub fn dense_retrieve(
    index: &DenseIndex,
    query: &str,
    k: usize,
    provider: &dyn EmbeddingProvider,
) -> Result<ScoredList, RetrievalError> {
    if provider.dimension() != index.dim {
        return Err(RetrievalError::DimensionMismatch {
            index: index.dim,
            provider: provider.dimension(),
        });
    }
    if crate::providers::tokenize(query).is_empty() {
        return Ok(ScoredList::empty());
    }
    let q = provider.embed(query)?;
    let list = ScoredList::from_scores(index.ids.iter().zip(index.vectors.iter()).map(
        |(id, v)| {
            let dot: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            (id.clone(), dot)
        },
    ))?;
    Ok(list.truncated(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::providers::TableEmbedder;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            id: ChunkId::new(id),
            text: text.into(),
            source_doc: "g".into(),
            language: "en".into(),
            section_title: None,
        }
    }

    #[test]
    fn identical_vector_ranks_first_with_score_one() {
        let provider = TableEmbedder::new(3)
            .with("a text", vec![1.0, 0.0, 0.0])
            .with("b text", vec![0.0, 1.0, 0.0])
            .with("query", vec![1.0, 0.0, 0.0]);
        let store =
            ChunkStore::from_chunks(vec![chunk("a", "a text"), chunk("b", "b text")]).unwrap();
        let index = build_dense_index(&store, &provider).unwrap();
        let hits = dense_retrieve(&index, "query", 2, &provider).unwrap();
        assert_eq!(hits.entries()[0].chunk_id.as_str(), "a");
        assert!((hits.entries()[0].score - 1.0).abs() < 1e-12);
        // Orthogonal chunk scores zero.
        assert!(hits.entries()[1].score.abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p3 = TableEmbedder::new(3).with("a text", vec![1.0, 0.0, 0.0]);
        let p4 = TableEmbedder::new(4).with("query", vec![1.0, 0.0, 0.0, 0.0]);
        let store = ChunkStore::from_chunks(vec![chunk("a", "a text")]).unwrap();
        let index = build_dense_index(&store, &p3).unwrap();
        assert!(matches!(
            dense_retrieve(&index, "query", 1, &p4),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ranking_matches_brute_force_on_random_vectors() {
        // Ten fixed pseudo-random unit vectors; ranking must equal a direct
        // sort of the dot products.
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 8;
        let mut provider = TableEmbedder::new(dim);
        let mut texts = Vec::new();
        for i in 0..10 {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let text = format!("chunk text {i}");
            provider = provider.with(text.clone(), v);
            texts.push(text);
        }
        let qv: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        provider = provider.with("the query", qv);

        let store = ChunkStore::from_chunks(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| chunk(&format!("c{i:02}"), t)),
        )
        .unwrap();
        let index = build_dense_index(&store, &provider).unwrap();
        let hits = dense_retrieve(&index, "the query", 10, &provider).unwrap();

        let q = provider.embed("the query").unwrap();
        let mut brute: Vec<(String, f64)> = store
            .iter()
            .map(|c| {
                let v = provider.embed(&c.text).unwrap();
                let dot: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                (c.id.to_string(), dot)
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let got: Vec<String> = hits.ids().map(|i| i.to_string()).collect();
        let expected: Vec<String> = brute.into_iter().map(|(id, _)| id).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn empty_query_yields_empty_list() {
        let provider = TableEmbedder::new(2).with("a text", vec![1.0, 0.0]);
        let store = ChunkStore::from_chunks(vec![chunk("a", "a text")]).unwrap();
        let index = build_dense_index(&store, &provider).unwrap();
        assert!(dense_retrieve(&index, "  ", 5, &provider).unwrap().is_empty());
    }
}
