//! Integration tests over the shipped fixture packs: multilingual flows,
//! degradation paths, post-generation escalation, and index snapshots.

use std::path::PathBuf;

use careroute_core::config::{
    load_index_snapshots, write_index_snapshots, Engine, RunConfig,
};
use careroute_core::lang::LanguageTag;
use careroute_core::pipeline::{run_pipeline, ResponseKind};
use careroute_core::providers::{FailingTranslator, FixedGenerator, FlakyGenerator};
use careroute_core::stage::PlatformMetadata;
use careroute_core::triage::{RouteLevel, TemplateType};

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .canonicalize()
        .unwrap()
}

fn engine() -> Engine {
    let config = RunConfig::load(fixtures_dir().join("config.json")).unwrap();
    Engine::build(&config).unwrap()
}

#[test]
fn hindi_query_translates_for_reranker_only() {
    let engine = engine();
    let query = "आयरन के लिए क्या खाना चाहिए?";
    let response = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
        .unwrap();
    assert_eq!(response.envelope.lang, LanguageTag::Hi);
    assert_eq!(
        response.envelope.english.as_deref(),
        Some("what should I eat for iron?")
    );
    // Retrieval consumed the original query; the reranker the English view.
    let retrieval = response.trace.step("retrieval").unwrap();
    assert_eq!(retrieval.detail["dense_query"], query);
    assert_eq!(retrieval.detail["sparse_query"], query);
    assert_eq!(retrieval.detail["rerank_query"], "what should I eat for iron?");
    assert_eq!(response.kind, ResponseKind::Informational);
}

#[test]
fn translation_failure_degrades_to_original_language_processing() {
    let mut engine = engine();
    engine.translator = Box::new(FailingTranslator);
    let query = "आयरन के लिए क्या खाना चाहिए?";
    let response = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
        .unwrap();
    assert!(response.trace.has_flag("translation_failed"));
    assert!(response.trace.has_flag("triage_degraded"));
    assert!(response.envelope.english.is_none());
    // Retrieval still ran on the original query; reranking was skipped.
    let retrieval = response.trace.step("retrieval").unwrap();
    assert!(retrieval.detail["rerank_query"].is_null());
    assert!(retrieval.detail["reranked"].is_null());
    assert_eq!(response.kind, ResponseKind::Informational);
}

#[test]
fn post_generation_escalation_replaces_generated_text() {
    let mut engine = engine();
    engine.generator = Box::new(FixedGenerator(
        "SAME-DAY\nthis generated body must be discarded".into(),
    ));
    let response = run_pipeline(
        "What foods increase iron?",
        PlatformMetadata::default(),
        &engine.pipeline_context(),
    )
    .unwrap();
    assert_eq!(response.kind, ResponseKind::Template);
    assert_eq!(response.routing.template, TemplateType::SameDay);
    assert!(response.sources.is_empty());
    assert!(!response.text.contains("discarded"));
    assert!(response.trace.has_step("retrieval"));
    assert!(response.trace.has_step("generation"));
}

#[test]
fn malformed_generation_label_is_flagged_pass() {
    let mut engine = engine();
    engine.generator = Box::new(FixedGenerator("Here is my answer without a label".into()));
    let response = run_pipeline(
        "What foods increase iron?",
        PlatformMetadata::default(),
        &engine.pipeline_context(),
    )
    .unwrap();
    assert_eq!(response.kind, ResponseKind::Informational);
    assert!(response.trace.has_flag("malformed_label"));
    assert_eq!(response.text, "Here is my answer without a label");
}

#[test]
fn missing_localization_falls_back_to_english_with_flag() {
    let mut engine = engine();
    // NOW-DV is only authored in English in the shipped pack; force the
    // post-generation check to request it for a Hindi query.
    engine.generator = Box::new(FixedGenerator("NOW-DV\nignored".into()));
    let response = run_pipeline(
        "आयरन के लिए क्या खाना चाहिए?",
        PlatformMetadata::default(),
        &engine.pipeline_context(),
    )
    .unwrap();
    assert_eq!(response.kind, ResponseKind::Template);
    assert_eq!(response.routing.template, TemplateType::NowDv);
    assert!(response.trace.has_flag("lang_fallback"));
    assert!(response.text.contains("safety comes first"));
}

#[test]
fn localized_template_used_when_available() {
    let engine = engine();
    // The Hindi haemorrhage phrasing is translated for the English view but
    // routes via the semantic stage only if similar enough; force a rule hit
    // by mixing scripts so the English pattern matches while detection stays
    // Hindi (majority Devanagari).
    let query = "मुझे चिंता है bleeding heavily हो रहा है अभी तुरंत";
    let response = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
        .unwrap();
    assert_eq!(response.envelope.lang, LanguageTag::Hi);
    assert_eq!(response.routing.level, RouteLevel::EmergencyNow);
    assert_eq!(response.routing.template, TemplateType::NowMed);
    // Hindi NOW-MED is in the pack, so no fallback flag.
    assert!(!response.trace.has_flag("lang_fallback"));
    assert!(response.text.contains("चैटबॉट"));
}

#[test]
fn now_mh_template_carries_hotlines() {
    let engine = engine();
    let response = run_pipeline(
        "I can't go on anymore",
        PlatformMetadata::default(),
        &engine.pipeline_context(),
    )
    .unwrap();
    assert_eq!(response.routing.template, TemplateType::NowMh);
    assert!(response.text.contains("9152987821"));
    assert!(response.text.contains("988"));
    assert!(response.sources.is_empty());
}

#[test]
fn same_day_addendum_appends_evidence_behind_flag() {
    let mut engine = engine();
    let query = "Baby moving less than usual";
    let plain = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
        .unwrap();
    assert!(!plain.trace.has_step("same_day_addendum"));

    engine.same_day_addendum = true;
    let with_addendum =
        run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context()).unwrap();
    assert_eq!(with_addendum.kind, ResponseKind::Template);
    assert!(with_addendum.trace.has_step("same_day_addendum"));
    assert!(with_addendum.text.len() > plain.text.len());
    // Template purity holds even with the addendum.
    assert!(with_addendum.sources.is_empty());
}

#[test]
fn generation_retries_within_budget() {
    let mut engine = engine();
    engine.generator = Box::new(FlakyGenerator::new(2, "PASS\nrecovered fine"));
    let response = run_pipeline(
        "What foods increase iron?",
        PlatformMetadata::default(),
        &engine.pipeline_context(),
    )
    .unwrap();
    assert_eq!(response.text, "recovered fine");

    let mut engine = self::engine();
    engine.generator = Box::new(FlakyGenerator::new(3, "PASS\nnever reached"));
    let err = run_pipeline(
        "What foods increase iron?",
        PlatformMetadata::default(),
        &engine.pipeline_context(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("3 attempts"), "{err}");
}

#[test]
fn deterministic_outputs_across_runs() {
    let engine = engine();
    for query in [
        "What foods increase iron?",
        "Bleeding heavily since morning",
        "Baby moving less than usual",
        "মোৰ খুব মূৰৰ বিষ আৰু চকুত অন্ধকাৰ লাগিছে",
    ] {
        let a = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
            .unwrap();
        let b = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a.trace).unwrap(),
            serde_json::to_string(&b.trace).unwrap(),
            "trace must be byte-identical for {query:?}"
        );
        assert_eq!(a.text, b.text);
    }
}

#[test]
fn snapshots_round_trip_and_reject_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig::load(fixtures_dir().join("config.json")).unwrap();
    let manifest = write_index_snapshots(&config, tmp.path()).unwrap();
    assert_eq!(manifest.embedder_dim, 64);

    let indexes = load_index_snapshots(&config, tmp.path()).unwrap();
    let fresh = Engine::build(&config).unwrap();
    assert_eq!(indexes.sparse, fresh.indexes.sparse);
    assert_eq!(indexes.dense, fresh.indexes.dense);

    // A changed BM25 parameter must be rejected.
    let mut tweaked = config.clone();
    tweaked.retrieval.bm25_k1 = 1.5;
    let err = load_index_snapshots(&tweaked, tmp.path()).unwrap_err();
    assert!(err.to_string().contains("BM25"), "{err}");

    // A missing snapshot is its own error.
    let empty = tempfile::tempdir().unwrap();
    let err = load_index_snapshots(&config, empty.path()).unwrap_err();
    assert!(matches!(
        err,
        careroute_core::config::ConfigError::MissingSnapshot(_)
    ));
}

#[test]
fn assamese_detection_and_translation_flow() {
    let engine = engine();
    let query = "শিশুটিয়ে ভালকৈ খোৱা নাই আৰু জ্বৰ আছে";
    let response = run_pipeline(query, PlatformMetadata::default(), &engine.pipeline_context())
        .unwrap();
    assert_eq!(response.envelope.lang, LanguageTag::As);
    assert_eq!(
        response.envelope.english.as_deref(),
        Some("the baby is not feeding well and has fever")
    );
}
