//! Synthetic multi-evidence retrieval benchmark builder.
//!
//! Each item is built in five recorded steps: sample an anchor chunk (seeded
//! RNG), expand candidates by dense retrieval on the anchor text, generate a
//! user-style question from the candidates, re-expand candidates by dense
//! retrieval on the question, then label every candidate DIRECT / RELATED /
//! IRRELEVANT. Items that end up with fewer than two DIRECT chunks are
//! discarded whole and regenerated a bounded number of times; labels are
//! never mutated to save an item.
//!
//! The per-item RNG stream is split from the run seed by item index, so a
//! parallel build would agree with the serial one.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ChunkId, ChunkStore};
use crate::providers::{
    EmbeddingProvider, EvidenceLabel, LabelerProvider, ProviderError, QuestionGenProvider,
};
use crate::retrieval::{dense_retrieve, DenseIndex};
use crate::scored::ScoredList;

/// Minimum DIRECT labels for a valid item.
pub const MIN_DIRECT: usize = 2;

/// Regeneration attempts per item before it is skipped.
pub const MAX_ATTEMPTS: u32 = 3;

/// Benchmark file schema version.
pub const BENCHMARK_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("store is empty")]
    EmptyStore,
    #[error("benchmark is empty")]
    EmptyBenchmark,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::RetrievalError),
}

/// Per-step record of how an item was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemProvenance {
    pub anchor_id: ChunkId,
    pub anchor_expansion: Vec<ChunkId>,
    pub question: String,
    pub question_expansion: Vec<ChunkId>,
    pub labeled_candidates: Vec<ChunkId>,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub question: String,
    pub anchor_id: ChunkId,
    pub labels: BTreeMap<ChunkId, EvidenceLabel>,
    pub provenance: ItemProvenance,
}

impl BenchmarkItem {
    pub fn direct_ids(&self) -> BTreeSet<ChunkId> {
        self.labels
            .iter()
            .filter(|(_, l)| **l == EvidenceLabel::Direct)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// A skipped item slot with the recorded reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub item_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub version: u32,
    pub corpus_digest: String,
    pub seed: u64,
    pub items: Vec<BenchmarkItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedItem>,
}

/// Summary statistics over DIRECT set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStats {
    pub n_items: usize,
    pub mean_direct: f64,
    pub min_direct: usize,
    pub max_direct: usize,
}

/// Dense retriever handle used for candidate expansion at steps 2 and 4.
pub struct ExpansionRetriever<'a> {
    pub index: &'a DenseIndex,
    pub provider: &'a dyn EmbeddingProvider,
    pub depth: usize,
}

impl ExpansionRetriever<'_> {
    fn expand(&self, text: &str) -> Result<ScoredList, BenchError> {
        Ok(dense_retrieve(self.index, text, self.depth, self.provider)?)
    }
}

fn item_seed(run_seed: u64, item_index: usize) -> u64 {
    // SplitMix64-style mix so adjacent item indexes get unrelated streams.
    let mut z = run_seed ^ (item_index as u64).wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Build `n_items` benchmark items over the store.
#[allow(clippy::too_many_arguments)]
pub fn build_benchmark(
    store: &ChunkStore,
    n_items: usize,
    retriever: &ExpansionRetriever<'_>,
    question_gen: &dyn QuestionGenProvider,
    labeler: &dyn LabelerProvider,
    seed: u64,
    corpus_digest: &str,
) -> Result<Benchmark, BenchError> {
    if store.is_empty() {
        return Err(BenchError::EmptyStore);
    }
    let ids: Vec<&ChunkId> = store.ids().collect();
    let mut items = Vec::with_capacity(n_items);
    let mut skipped = Vec::new();

    for item_index in 0..n_items {
        let mut rng = ChaCha8Rng::seed_from_u64(item_seed(seed, item_index));
        let mut last_reason = String::new();
        let mut produced = None;

        for attempt in 1..=MAX_ATTEMPTS {
            match build_one(store, &ids, retriever, question_gen, labeler, &mut rng, attempt) {
                Ok(item) => {
                    produced = Some(item);
                    break;
                }
                Err(reason) => last_reason = reason,
            }
        }
        match produced {
            Some(item) => items.push(item),
            None => skipped.push(SkippedItem {
                item_index,
                reason: last_reason,
            }),
        }
    }

    Ok(Benchmark {
        version: BENCHMARK_VERSION,
        corpus_digest: corpus_digest.to_string(),
        seed,
        items,
        skipped,
    })
}

fn build_one(
    store: &ChunkStore,
    ids: &[&ChunkId],
    retriever: &ExpansionRetriever<'_>,
    question_gen: &dyn QuestionGenProvider,
    labeler: &dyn LabelerProvider,
    rng: &mut ChaCha8Rng,
    attempt: u32,
) -> Result<BenchmarkItem, String> {
    // Step 1: anchor sampling.
    let anchor_id = ids[rng.random_range(0..ids.len())].clone();
    let anchor = store.get(&anchor_id).expect("anchor id from store");

    // Step 2: candidate pool expansion on the anchor text.
    let anchor_expansion = retriever
        .expand(&anchor.text)
        .map_err(|e| format!("anchor expansion failed: {e}"))?;

    // Step 3: question generation over the expanded pool.
    let pool_chunks: Vec<&crate::corpus::Chunk> = anchor_expansion
        .ids()
        .filter_map(|id| store.get(id))
        .collect();
    let question = question_gen
        .generate_question(&pool_chunks)
        .map_err(|e| format!("question generation failed: {e}"))?;

    // Step 4: candidate pool re-expansion on the generated question.
    let question_expansion = retriever
        .expand(&question)
        .map_err(|e| format!("question expansion failed: {e}"))?;

    // Step 5: label every candidate (union of both expansions, plus the
    // anchor itself).
    let mut candidates: BTreeSet<ChunkId> = anchor_expansion.ids().cloned().collect();
    candidates.extend(question_expansion.ids().cloned());
    candidates.insert(anchor_id.clone());

    let mut labels = BTreeMap::new();
    for id in &candidates {
        let chunk = store.get(id).expect("candidate id from store");
        let label = labeler
            .label(&question, chunk)
            .map_err(|e| format!("labeling failed: {e}"))?;
        labels.insert(id.clone(), label);
    }

    let n_direct = labels
        .values()
        .filter(|l| **l == EvidenceLabel::Direct)
        .count();
    if n_direct < MIN_DIRECT {
        return Err(format!(
            "only {n_direct} DIRECT labels (minimum {MIN_DIRECT})"
        ));
    }

    let provenance = ItemProvenance {
        anchor_id: anchor_id.clone(),
        anchor_expansion: anchor_expansion.ids().cloned().collect(),
        question: question.clone(),
        question_expansion: question_expansion.ids().cloned().collect(),
        labeled_candidates: candidates.into_iter().collect(),
        attempt,
    };
    Ok(BenchmarkItem {
        question,
        anchor_id,
        labels,
        provenance,
    })
}

/// Exact arithmetic over DIRECT set sizes.
pub fn benchmark_stats(bench: &Benchmark) -> Result<BenchmarkStats, BenchError> {
    if bench.items.is_empty() {
        return Err(BenchError::EmptyBenchmark);
    }
    let sizes: Vec<usize> = bench.items.iter().map(|i| i.direct_ids().len()).collect();
    Ok(BenchmarkStats {
        n_items: sizes.len(),
        mean_direct: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
        min_direct: *sizes.iter().min().expect("non-empty"),
        max_direct: *sizes.iter().max().expect("non-empty"),
    })
}

/// Gold-set completeness audit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audited: usize,
    pub newly_direct: usize,
    pub related: usize,
    pub irrelevant: usize,
    pub frac_newly_direct: f64,
}

/// Re-label the top-`depth` chunks of each item's system ranking that were
/// not originally DIRECT, and report how the auditor classifies them.
pub fn audit_gold(
    bench: &Benchmark,
    system_ranked: &BTreeMap<usize, ScoredList>,
    auditor: &dyn LabelerProvider,
    depth: usize,
    store: &ChunkStore,
) -> Result<AuditReport, BenchError> {
    let mut audited = 0usize;
    let mut newly_direct = 0usize;
    let mut related = 0usize;
    let mut irrelevant = 0usize;
    for (item_index, item) in bench.items.iter().enumerate() {
        let Some(ranking) = system_ranked.get(&item_index) else {
            continue;
        };
        for id in ranking.truncated(depth).ids() {
            if item.labels.get(id) == Some(&EvidenceLabel::Direct) {
                continue;
            }
            let Some(chunk) = store.get(id) else { continue };
            audited += 1;
            match auditor.label(&item.question, chunk)? {
                EvidenceLabel::Direct => newly_direct += 1,
                EvidenceLabel::Related => related += 1,
                EvidenceLabel::Irrelevant => irrelevant += 1,
            }
        }
    }
    let frac_newly_direct = if audited == 0 {
        0.0
    } else {
        newly_direct as f64 / audited as f64
    };
    Ok(AuditReport {
        audited,
        newly_direct,
        related,
        irrelevant,
        frac_newly_direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::providers::{
        HashEmbedder, LexicalLabeler, SingleDirectLabeler, TableLabeler, TemplateQuestionGen,
    };
    use crate::retrieval::build_dense_index;

    fn store() -> ChunkStore {
        let topics = [
            ("c01", "iron rich foods and leafy vegetables for diet"),
            ("c02", "iron tablets and folic acid in diet"),
            ("c03", "iron deficiency and pale skin diet advice"),
            ("c04", "fever danger signs and urgent care"),
            ("c05", "fever medicine dosing and rest"),
            ("c06", "breastfeeding latch and positions"),
            ("c07", "breastfeeding frequency for newborn"),
            ("c08", "swelling of feet in late pregnancy"),
            ("c09", "swelling and headache warning signs"),
            ("c10", "sleep positions during late pregnancy"),
        ];
        ChunkStore::from_chunks(topics.map(|(id, text)| Chunk {
            id: ChunkId::new(id),
            text: text.into(),
            source_doc: "g".into(),
            language: "en".into(),
            section_title: None,
        }))
        .unwrap()
    }

    #[test]
    fn seeded_build_is_byte_identical() {
        let store = store();
        let embedder = HashEmbedder::default();
        let index = build_dense_index(&store, &embedder).unwrap();
        let retriever = ExpansionRetriever {
            index: &index,
            provider: &embedder,
            depth: 5,
        };
        let labeler = LexicalLabeler::default();
        let build = || {
            build_benchmark(
                &store,
                5,
                &retriever,
                &TemplateQuestionGen,
                &labeler,
                42,
                "digest",
            )
            .unwrap()
        };
        let a = serde_json::to_string(&build()).unwrap();
        let b = serde_json::to_string(&build()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_direct_items_are_discarded() {
        let store = store();
        let embedder = HashEmbedder::default();
        let index = build_dense_index(&store, &embedder).unwrap();
        let retriever = ExpansionRetriever {
            index: &index,
            provider: &embedder,
            depth: 5,
        };
        // Labeler marks only one fixed chunk DIRECT → every attempt fails the
        // minimum-DIRECT rule → all slots skipped, none half-kept.
        let labeler = SingleDirectLabeler(ChunkId::new("c01"));
        let bench = build_benchmark(
            &store,
            3,
            &retriever,
            &TemplateQuestionGen,
            &labeler,
            7,
            "digest",
        )
        .unwrap();
        assert!(bench.items.is_empty());
        assert_eq!(bench.skipped.len(), 3);
        assert!(bench.skipped[0].reason.contains("DIRECT"));
    }

    #[test]
    fn candidates_are_union_of_both_expansions() {
        let store = store();
        let embedder = HashEmbedder::default();
        let index = build_dense_index(&store, &embedder).unwrap();
        let retriever = ExpansionRetriever {
            index: &index,
            provider: &embedder,
            depth: 4,
        };
        let labeler = LexicalLabeler::with_thresholds(0.05, 0.02);
        let bench = build_benchmark(
            &store,
            4,
            &retriever,
            &TemplateQuestionGen,
            &labeler,
            1,
            "digest",
        )
        .unwrap();
        for item in &bench.items {
            let mut expected: BTreeSet<ChunkId> =
                item.provenance.anchor_expansion.iter().cloned().collect();
            expected.extend(item.provenance.question_expansion.iter().cloned());
            expected.insert(item.provenance.anchor_id.clone());
            let labeled: BTreeSet<ChunkId> = item.labels.keys().cloned().collect();
            assert_eq!(labeled, expected);
            // Totality: exactly one label per candidate is guaranteed by the
            // map; every candidate must be present.
            assert_eq!(item.provenance.labeled_candidates.len(), item.labels.len());
        }
        assert!(!bench.items.is_empty());
    }

    #[test]
    fn stats_arithmetic() {
        let mk_item = |n_direct: usize| {
            let labels: BTreeMap<ChunkId, EvidenceLabel> = (0..n_direct)
                .map(|i| (ChunkId::new(format!("d{i}")), EvidenceLabel::Direct))
                .chain([(ChunkId::new("r0"), EvidenceLabel::Related)])
                .collect();
            BenchmarkItem {
                question: "q".into(),
                anchor_id: ChunkId::new("d0"),
                labels,
                provenance: ItemProvenance {
                    anchor_id: ChunkId::new("d0"),
                    anchor_expansion: vec![],
                    question: "q".into(),
                    question_expansion: vec![],
                    labeled_candidates: vec![],
                    attempt: 1,
                },
            }
        };
        let bench = Benchmark {
            version: BENCHMARK_VERSION,
            corpus_digest: "d".into(),
            seed: 0,
            items: vec![mk_item(2), mk_item(4), mk_item(6)],
            skipped: vec![],
        };
        let stats = benchmark_stats(&bench).unwrap();
        assert_eq!(stats.mean_direct, 4.0);
        assert_eq!(stats.min_direct, 2);
        assert_eq!(stats.max_direct, 6);

        let single = Benchmark {
            items: vec![mk_item(3)],
            ..bench.clone()
        };
        assert_eq!(benchmark_stats(&single).unwrap().mean_direct, 3.0);

        let empty = Benchmark {
            items: vec![],
            ..bench
        };
        assert!(matches!(
            benchmark_stats(&empty),
            Err(BenchError::EmptyBenchmark)
        ));
    }

    #[test]
    fn audit_flipping_one_of_twenty_is_five_percent() {
        let store = store();
        // One item whose labels mark c01 DIRECT and c02..c05 RELATED; the
        // system ranking surfaces 20 audited slots across 5 duplicated item
        // rankings... simpler: depth 5 over 4 items = 20 audited non-DIRECT
        // chunks, auditor flips exactly one RELATED to DIRECT.
        let mk_labels = |direct: &str| -> BTreeMap<ChunkId, EvidenceLabel> {
            let mut m = BTreeMap::new();
            m.insert(ChunkId::new(direct), EvidenceLabel::Direct);
            for id in ["c02", "c03", "c04", "c05", "c06"] {
                m.insert(ChunkId::new(id), EvidenceLabel::Related);
            }
            m
        };
        let item = |q: &str| BenchmarkItem {
            question: q.into(),
            anchor_id: ChunkId::new("c01"),
            labels: mk_labels("c01"),
            provenance: ItemProvenance {
                anchor_id: ChunkId::new("c01"),
                anchor_expansion: vec![],
                question: q.into(),
                question_expansion: vec![],
                labeled_candidates: vec![],
                attempt: 1,
            },
        };
        let bench = Benchmark {
            version: BENCHMARK_VERSION,
            corpus_digest: "d".into(),
            seed: 0,
            items: vec![item("q0"), item("q1"), item("q2"), item("q3")],
            skipped: vec![],
        };
        let ranking: ScoredList = ["c02", "c03", "c04", "c05", "c06"]
            .iter()
            .enumerate()
            .map(|(i, id)| (ChunkId::new(*id), 10.0 - i as f64))
            .collect();
        let rankings: BTreeMap<usize, ScoredList> =
            (0..4).map(|i| (i, ranking.clone())).collect();

        // Auditor that never flips anything to DIRECT → 0% newly identified.
        let agreeing = TableLabeler::default();
        let report = audit_gold(&bench, &rankings, &agreeing, 5, &store).unwrap();
        assert_eq!(report.audited, 20);
        assert_eq!(report.newly_direct, 0);
        assert_eq!(report.frac_newly_direct, 0.0);

        // Auditor flips exactly one audited chunk (c02 of item 0 — but the
        // table labeler is question-agnostic, so flip c02 everywhere would be
        // 4 flips; instead flip a chunk present in only one ranking slot.
        // Make item 3's ranking include a unique chunk c07.)
        let mut rankings2 = rankings.clone();
        rankings2.insert(
            3,
            ["c07", "c03", "c04", "c05", "c06"]
                .iter()
                .enumerate()
                .map(|(i, id)| (ChunkId::new(*id), 10.0 - i as f64))
                .collect(),
        );
        let flipping = TableLabeler::default().with(ChunkId::new("c07"), EvidenceLabel::Direct);
        let report = audit_gold(&bench, &rankings2, &flipping, 5, &store).unwrap();
        assert_eq!(report.audited, 20);
        assert_eq!(report.newly_direct, 1);
        assert!((report.frac_newly_direct - 0.05).abs() < 1e-12);
    }

    #[test]
    fn audit_depth_zero_is_empty() {
        let store = store();
        let bench = Benchmark {
            version: BENCHMARK_VERSION,
            corpus_digest: "d".into(),
            seed: 0,
            items: vec![],
            skipped: vec![],
        };
        let report =
            audit_gold(&bench, &BTreeMap::new(), &TableLabeler::default(), 0, &store).unwrap();
        assert_eq!(report.audited, 0);
        assert_eq!(report.frac_newly_direct, 0.0);
    }
}
