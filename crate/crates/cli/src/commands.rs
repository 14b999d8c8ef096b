//! index / ask / triage / benchgen commands.

use std::path::Path;

use careroute_core::benchgen::{benchmark_stats, build_benchmark, ExpansionRetriever};
use careroute_core::config::{
    file_digest, load_index_snapshots, make_embedder, make_translator, write_index_snapshots,
    Engine, RunConfig, SnapshotPaths,
};
use careroute_core::pipeline::{build_envelope, run_pipeline};
use careroute_core::providers::{LexicalLabeler, TemplateQuestionGen};
use careroute_core::stage::{LifeStage, PlatformMetadata};
use careroute_core::trace::PipelineTrace;
use careroute_core::triage::{pre_gen_triage, RulePack, SemanticMatcher, TriageContext};

use crate::{AskArgs, BenchgenArgs, CliError, QueryArgs};

pub fn cmd_index(config: &RunConfig, index_dir: &Path) -> Result<(), CliError> {
    let paths = SnapshotPaths::in_dir(index_dir);
    // No-op detection: if a manifest exists and still matches the corpus and
    // config, leave the snapshots untouched.
    if paths.manifest.exists() {
        if let Ok(existing) = std::fs::read_to_string(&paths.manifest) {
            if let Ok(manifest) =
                serde_json::from_str::<careroute_core::config::IndexManifest>(&existing)
            {
                let corpus_digest = file_digest(&config.corpus)?;
                if manifest.corpus_digest == corpus_digest
                    && manifest.retrieval == config.retrieval
                {
                    println!(
                        "index up to date (corpus digest {})",
                        &manifest.corpus_digest[..12]
                    );
                    return Ok(());
                }
            }
        }
    }
    let manifest = write_index_snapshots(config, index_dir)?;
    println!(
        "indexed {} → sparse {} dense {} (corpus digest {})",
        config.corpus.display(),
        &manifest.sparse_digest[..12],
        &manifest.dense_digest[..12],
        &manifest.corpus_digest[..12]
    );
    Ok(())
}

fn metadata_from(args: &QueryArgs) -> Result<PlatformMetadata, CliError> {
    let meta = PlatformMetadata {
        gestational_week: args.gestational_week,
        postpartum_weeks: args.postpartum_weeks,
        newborn_age_days: args.newborn_age_days,
    };
    meta.validate().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(meta)
}

fn stage_override(args: &QueryArgs) -> Result<Option<LifeStage>, CliError> {
    match &args.stage_override {
        None => Ok(None),
        Some(s) => LifeStage::parse(s)
            .map(Some)
            .ok_or_else(|| CliError::Input(format!("unknown stage: {s}"))),
    }
}

pub fn cmd_ask(config: &RunConfig, index_dir: &Path, args: &AskArgs) -> Result<(), CliError> {
    // Verify snapshots exist before doing any heavier work.
    load_index_snapshots(config, index_dir)?;
    let engine = Engine::with_snapshots(config, index_dir)?;
    // --stage-override rides on metadata precedence: a representative
    // metadata field for the forced stage wins over any text cue.
    let meta = match stage_override(&args.query)? {
        Some(LifeStage::MaternalPregnant) => PlatformMetadata {
            gestational_week: Some(20),
            ..Default::default()
        },
        Some(LifeStage::Postpartum) => PlatformMetadata {
            postpartum_weeks: Some(2),
            ..Default::default()
        },
        Some(LifeStage::Newborn) => PlatformMetadata {
            newborn_age_days: Some(7),
            ..Default::default()
        },
        None => metadata_from(&args.query)?,
    };
    let response = run_pipeline(&args.query.query, meta, &engine.pipeline_context())?;
    print_response(&response, args.trace)
}

fn print_response(
    response: &careroute_core::pipeline::FinalResponse,
    with_trace: bool,
) -> Result<(), CliError> {
    let mut value = serde_json::json!({
        "text": response.text,
        "kind": response.kind,
        "sources": response.sources,
        "routing": response.routing,
        "lang": response.envelope.lang,
        "stage": response.envelope.stage,
        "concerns": response.envelope.concerns,
    });
    if with_trace {
        value["trace"] =
            serde_json::to_value(&response.trace).map_err(|e| CliError::Input(e.to_string()))?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&value).map_err(|e| CliError::Input(e.to_string()))?
    );
    Ok(())
}

pub fn cmd_triage(config: &RunConfig, args: &QueryArgs) -> Result<(), CliError> {
    let patterns = careroute_core::stage::PatternPack::load(&config.pattern_pack)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let rules =
        RulePack::load(&config.rule_pack).map_err(|e| CliError::Input(e.to_string()))?;
    let embedder = make_embedder(&config.providers.embedder);
    let matcher = SemanticMatcher::load(
        &config.symptom_bank,
        embedder.as_ref(),
        config.tau_now,
        config.tau_sd,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let translator = make_translator(&config.providers.translator)?;

    let meta = metadata_from(args)?;
    let mut trace = PipelineTrace::default();
    let mut envelope = build_envelope(
        &args.query,
        meta,
        &patterns,
        translator.as_ref(),
        &mut trace,
    )?;
    if let Some(stage) = stage_override(args)? {
        envelope.stage = stage;
    }
    let ctx = TriageContext {
        rules: &rules,
        matcher: Some(&matcher),
        encoder: Some(embedder.as_ref()),
    };
    let outcome = pre_gen_triage(
        &envelope.normalized,
        envelope.english.as_deref(),
        envelope.stage,
        &envelope.concerns,
        &ctx,
    );
    let value = serde_json::json!({
        "routing": outcome,
        "lang": envelope.lang,
        "stage": envelope.stage,
        "concerns": envelope.concerns,
        "english": envelope.english,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&value).map_err(|e| CliError::Input(e.to_string()))?
    );
    Ok(())
}

pub fn cmd_benchgen(config: &RunConfig, args: &BenchgenArgs) -> Result<(), CliError> {
    let engine = Engine::build(config)?;
    let embedder = make_embedder(&config.providers.embedder);
    let retriever = ExpansionRetriever {
        index: &engine.indexes.dense,
        provider: embedder.as_ref(),
        depth: config.retrieval.k_dense,
    };
    let labeler = LexicalLabeler::default();
    let corpus_digest = file_digest(&config.corpus)?;
    let bench = build_benchmark(
        &engine.store,
        args.n_items,
        &retriever,
        &TemplateQuestionGen,
        &labeler,
        config.seed,
        &corpus_digest,
    )
    .map_err(|e| CliError::Provider(e.to_string()))?;
    let json = serde_json::to_string_pretty(&bench).map_err(|e| CliError::Input(e.to_string()))?;
    std::fs::write(&args.out, json)?;
    match benchmark_stats(&bench) {
        Ok(stats) => println!(
            "wrote {} items to {} (DIRECT per item: mean {:.2}, range {}–{}; {} skipped)",
            bench.items.len(),
            args.out.display(),
            stats.mean_direct,
            stats.min_direct,
            stats.max_direct,
            bench.skipped.len()
        ),
        Err(_) => println!(
            "wrote 0 items to {} ({} skipped)",
            args.out.display(),
            bench.skipped.len()
        ),
    }
    if bench.items.len() < args.n_items {
        eprintln!(
            "warning: produced {} of {} requested items",
            bench.items.len(),
            args.n_items
        );
    }
    Ok(())
}
