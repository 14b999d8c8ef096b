//! Property tests over the library invariants.

use std::collections::BTreeSet;

use proptest::prelude::*;

use careroute_core::corpus::{Chunk, ChunkId, ChunkStore};
use careroute_core::evalkit::{qwk, retrieval_metrics, wilson_interval};
use careroute_core::pipeline::normalize;
use careroute_core::retrieval::rrf_fuse;
use careroute_core::scored::ScoredList;
use careroute_core::triage::{negation_guard, NEGATION_WINDOW_CHARS};

fn scored_list_strategy() -> impl Strategy<Value = ScoredList> {
    prop::collection::btree_map(0usize..40, -100.0f64..100.0, 0..25).prop_map(|m| {
        ScoredList::from_scores(
            m.into_iter()
                .map(|(i, s)| (ChunkId::new(format!("p{i:02}")), s)),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn normalize_is_idempotent(raw in "\\PC{0,60}") {
        if let Ok(once) = normalize(&raw) {
            let twice = normalize(&once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn scored_list_invariant_holds_after_construction(list in scored_list_strategy()) {
        prop_assert!(list.validate().is_ok());
        prop_assert!(list.truncated(5).validate().is_ok());
        prop_assert!(list.deduplicate().validate().is_ok());
    }

    #[test]
    fn fused_ids_come_from_inputs(
        a in scored_list_strategy(),
        b in scored_list_strategy(),
        c in scored_list_strategy(),
    ) {
        let fused = rrf_fuse(&[a.clone(), b.clone(), c.clone()], 60).unwrap();
        prop_assert!(fused.validate().is_ok());
        for id in fused.ids() {
            prop_assert!(a.contains(id) || b.contains(id) || c.contains(id));
        }
        // Every input id is present exactly once.
        let expected: BTreeSet<_> = a.ids().chain(b.ids()).chain(c.ids()).cloned().collect();
        prop_assert_eq!(fused.len(), expected.len());
    }

    #[test]
    fn single_list_fusion_preserves_order(list in scored_list_strategy()) {
        let fused = rrf_fuse(std::slice::from_ref(&list), 60).unwrap();
        let got: Vec<_> = fused.ids().collect();
        let want: Vec<_> = list.ids().collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn wilson_contains_point_estimate(successes in 0u64..500, extra in 1u64..500) {
        let n = successes + extra;
        let (lo, hi) = wilson_interval(successes, n, 0.95).unwrap();
        let p = successes as f64 / n as f64;
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((0.0..=1.0).contains(&hi));
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
    }

    #[test]
    fn recall_and_hit_monotone_in_k(
        ranked in scored_list_strategy(),
        direct_seed in prop::collection::btree_set(0usize..40, 1..8),
    ) {
        let direct: BTreeSet<ChunkId> = direct_seed
            .into_iter()
            .map(|i| ChunkId::new(format!("p{i:02}")))
            .collect();
        let ks: Vec<usize> = (1..=30).collect();
        let m = retrieval_metrics(&ranked, &direct, &ks).unwrap();
        for w in ks.windows(2) {
            prop_assert!(m.recall_at[&w[0]] <= m.recall_at[&w[1]] + 1e-12);
            prop_assert!(m.hit_at[&w[0]] <= m.hit_at[&w[1]] + 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&m.reciprocal_rank));
    }

    #[test]
    fn qwk_symmetric_and_self_is_one(
        a in prop::collection::vec(1usize..=3, 2..50),
        b_seed in prop::collection::vec(1usize..=3, 2..50),
    ) {
        let b: Vec<usize> = a.iter().zip(b_seed.iter().cycle()).map(|(_, s)| *s).collect();
        let ab = qwk(&a, &b, 3).unwrap();
        let ba = qwk(&b, &a, 3).unwrap();
        prop_assert!((ab.kappa - ba.kappa).abs() < 1e-12);
        let self_k = qwk(&a, &a, 3).unwrap();
        prop_assert!((self_k.kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negation_window_boundary_is_exact(filler_len in 0usize..80) {
        // "never" + space + filler + trigger: the guard fires iff the whole
        // negation word sits within the window before the trigger.
        let filler = "y".repeat(filler_len);
        let text = format!("never {filler} heavy bleeding");
        let match_start = text.chars().count() - "heavy bleeding".chars().count();
        let word_start_in_window = match_start <= NEGATION_WINDOW_CHARS;
        prop_assert_eq!(negation_guard(&text, match_start), word_start_in_window);
    }

    #[test]
    fn corpus_round_trip(texts in prop::collection::vec("[a-z ]{1,30}", 1..10)) {
        let chunks: Vec<Chunk> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.trim().is_empty())
            .map(|(i, t)| Chunk {
                id: ChunkId::new(format!("r{i:02}")),
                text: t.clone(),
                source_doc: "prop".into(),
                language: "en".into(),
                section_title: if i % 2 == 0 { Some(format!("s{i}")) } else { None },
            })
            .collect();
        prop_assume!(!chunks.is_empty());
        let store = ChunkStore::from_chunks(chunks).unwrap();
        let jsonl = store.to_jsonl();
        let reloaded = careroute_core::corpus::parse_corpus(&jsonl).unwrap();
        prop_assert_eq!(store, reloaded);
    }
}
