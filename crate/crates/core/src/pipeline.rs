//! End-to-end orchestration.
//!
//! The request path: normalize → language detection and English view →
//! stage and concern extraction → pre-generation triage. Escalations
//! short-circuit to an expert template with an empty source list and no
//! retrieval or generation step in the trace. Pass-through queries go through
//! hybrid retrieval, evidence-grounded generation with a label-first output
//! contract, and a post-generation escalation check: any escalation label on
//! the first line replaces the generated text with the corresponding
//! template, so escalation wording is never model-authored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ChunkId, ChunkStore};
use crate::lang::{self, LangError, LanguageTag};
use crate::providers::{
    EmbeddingProvider, GeneratorProvider, PromptParts, RerankScorer, TranslatorProvider,
};
use crate::retrieval::{retrieve_and_rerank, Indexes, RetrievalConfig, RetrievalError};
use crate::stage::{extract_concerns, extract_stage, ConcernTags, LifeStage, PatternPack,
    PlatformMetadata};
use crate::trace::PipelineTrace;
use crate::triage::{pre_gen_triage, RouteLevel, RoutingOutcome, TemplateType, TriageContext};

/// The user query plus everything derived from it before triage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryEnvelope {
    pub raw: String,
    pub normalized: String,
    pub lang: LanguageTag,
    /// English view; equals `normalized` when the query is English, `None`
    /// when translation failed (degraded processing).
    pub english: Option<String>,
    pub meta: PlatformMetadata,
    pub stage: LifeStage,
    pub concerns: ConcernTags,
}

/// Parsed label-first generator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    pub label: TemplateType,
    pub body: String,
    pub cited_chunk_ids: Vec<ChunkId>,
    /// True when the first line was not a valid label and the output was
    /// treated as PASS.
    pub malformed: bool,
}

/// What the caller gets back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Template,
    Informational,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalResponse {
    pub text: String,
    pub kind: ResponseKind,
    /// Evidence chunk ids; always empty for template responses.
    pub sources: Vec<ChunkId>,
    pub routing: RoutingOutcome,
    pub envelope: QueryEnvelope,
    pub trace: PipelineTrace,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("empty query")]
    EmptyQuery,
    #[error("no template for type {0} in any language")]
    UnknownTemplate(TemplateType),
    #[error("cannot render PASS as a template")]
    PassIsNotATemplate,
    #[error("cannot read template pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("template pack line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("generation failed after {attempts} attempts: {message}")]
    GenerationFailed { attempts: u32, message: String },
    #[error(transparent)]
    Stage(#[from] crate::stage::StageError),
}

/// Trim, collapse internal whitespace runs, strip control characters.
/// Letters, digits and punctuation in any script pass through untouched.
pub fn normalize(raw: &str) -> Result<String, PipelineError> {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        if ch.is_control() {
            continue;
        }
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(ch);
    }
    if out.is_empty() {
        return Err(PipelineError::EmptyQuery);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct TemplateRecord {
    template: TemplateType,
    lang: String,
    text: String,
}

/// Expert-authored template texts keyed by (template, language), with
/// English fallback when a localization is missing.
#[derive(Debug, Default)]
pub struct TemplatePack {
    texts: BTreeMap<(TemplateType, String), String>,
}

impl TemplatePack {
    pub fn parse(jsonl: &str) -> Result<Self, PipelineError> {
        let mut texts = BTreeMap::new();
        for (idx, raw) in jsonl.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let rec: TemplateRecord =
                serde_json::from_str(raw).map_err(|e| PipelineError::Malformed {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            texts.insert((rec.template, rec.lang), rec.text);
        }
        Ok(Self { texts })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, PipelineError> {
        let contents = std::fs::read_to_string(path)?;
        Self::parse(&contents)
    }

    /// Template text for (type, lang); falls back to English. The boolean is
    /// true when the fallback was taken.
    pub fn lookup(
        &self,
        template: TemplateType,
        lang: LanguageTag,
    ) -> Result<(&str, bool), PipelineError> {
        if template == TemplateType::Pass {
            return Err(PipelineError::PassIsNotATemplate);
        }
        if let Some(text) = self.texts.get(&(template, lang.code().to_string())) {
            return Ok((text, false));
        }
        self.texts
            .get(&(template, "en".to_string()))
            .map(|t| (t.as_str(), lang != LanguageTag::En))
            .ok_or(PipelineError::UnknownTemplate(template))
    }
}

/// Parse the label-first contract: the first line must be exactly one of the
/// five labels (case-sensitive, surrounding whitespace tolerated). Anything
/// else is treated as PASS with the malformed flag set — pre-generation
/// triage has already caught explicit emergencies, and escalating on
/// formatting noise would flood the templates.
pub fn parse_leading_label(raw_generation: &str) -> (TemplateType, String, bool) {
    let mut lines = raw_generation.splitn(2, '\n');
    let first = lines.next().unwrap_or("").trim();
    let rest = lines.next().unwrap_or("").to_string();
    match TemplateType::parse(first) {
        Some(label) => (label, rest, false),
        None => (TemplateType::Pass, raw_generation.to_string(), true),
    }
}

/// Generation settings enforced uniformly across providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_s: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            max_retries: 3,
            timeout_s: 60,
        }
    }
}

/// Everything `run_pipeline` needs besides the query.
pub struct PipelineContext<'a> {
    pub patterns: &'a PatternPack,
    pub triage: TriageContext<'a>,
    pub templates: &'a TemplatePack,
    pub prompt_skeleton: &'a str,
    pub retrieval: &'a RetrievalConfig,
    pub generation: &'a GenerationConfig,
    pub indexes: &'a Indexes,
    pub store: &'a ChunkStore,
    pub embedder: &'a dyn EmbeddingProvider,
    pub translator: &'a dyn TranslatorProvider,
    pub reranker: Option<&'a dyn RerankScorer>,
    pub generator: &'a dyn GeneratorProvider,
    /// Append an evidence addendum to SAME-DAY templates. Off by default;
    /// enabling it adds a retrieval step after the template short-circuit.
    pub same_day_addendum: bool,
}

/// Build the envelope: normalize, detect language, compute the English view
/// (degrading on translator failure), infer stage and concerns.
pub fn build_envelope(
    raw: &str,
    meta: PlatformMetadata,
    patterns: &PatternPack,
    translator: &dyn TranslatorProvider,
    trace: &mut PipelineTrace,
) -> Result<QueryEnvelope, PipelineError> {
    meta.validate()?;
    let normalized = normalize(raw)?;
    trace.record(
        "normalize",
        raw,
        &normalized,
        serde_json::json!({}),
        None,
    );

    let lang = lang::detect_language(&normalized).map_err(|_| PipelineError::EmptyQuery)?;
    trace.record(
        "language",
        &normalized,
        lang.code(),
        serde_json::json!({ "lang": lang.code() }),
        None,
    );

    let english = match lang::english_view(&normalized, lang, translator) {
        Ok(en) => {
            trace.record(
                "english_view",
                &normalized,
                &en,
                serde_json::json!({ "translated": lang != LanguageTag::En }),
                None,
            );
            Some(en)
        }
        Err(LangError::TranslationFailed { original }) => {
            trace.flag("translation_failed");
            trace.record(
                "english_view",
                &original,
                "",
                serde_json::json!({ "failed": true }),
                None,
            );
            None
        }
        Err(LangError::EmptyText) => return Err(PipelineError::EmptyQuery),
    };

    let stage = extract_stage(&normalized, &meta, patterns);
    let concerns = extract_concerns(&normalized, stage, patterns);
    trace.record(
        "stage",
        &normalized,
        stage.code(),
        serde_json::json!({ "stage": stage.code(), "concerns": concerns }),
        None,
    );

    Ok(QueryEnvelope {
        raw: raw.to_string(),
        normalized,
        lang,
        english,
        meta,
        stage,
        concerns,
    })
}

/// Render a template response for the envelope's language, falling back to
/// English with a trace flag when the localization is missing. Sources are
/// always empty for templates.
pub fn render_template(
    template: TemplateType,
    envelope: &QueryEnvelope,
    pack: &TemplatePack,
    trace: &mut PipelineTrace,
) -> Result<String, PipelineError> {
    let (text, fell_back) = pack.lookup(template, envelope.lang)?;
    if fell_back {
        trace.flag("lang_fallback");
    }
    trace.record(
        "render_template",
        template.code(),
        text,
        serde_json::json!({ "template": template.code(), "lang_fallback": fell_back }),
        None,
    );
    Ok(text.to_string())
}

fn assemble_prompt(
    skeleton: &str,
    evidence: &[(String, String)],
    question: &str,
) -> PromptParts {
    let context_block = evidence
        .iter()
        .map(|(id, text)| format!("[{id}] {text}"))
        .collect::<Vec<_>>()
        .join("\n");
    let system_rules = skeleton
        .replace("{context}", &context_block)
        .replace("{question}", question);
    PromptParts {
        system_rules,
        context: evidence.to_vec(),
        question: question.to_string(),
    }
}

/// Full request path. With deterministic providers this is a pure function
/// of (raw query, metadata, config, fixture packs).
pub fn run_pipeline(
    raw_query: &str,
    meta: PlatformMetadata,
    ctx: &PipelineContext<'_>,
) -> Result<FinalResponse, PipelineError> {
    let mut trace = PipelineTrace::default();
    let envelope = build_envelope(raw_query, meta, ctx.patterns, ctx.translator, &mut trace)?;

    // Triage before retrieval.
    let routing = pre_gen_triage(
        &envelope.normalized,
        envelope.english.as_deref(),
        envelope.stage,
        &envelope.concerns,
        &ctx.triage,
    );
    if routing.degraded {
        trace.flag("triage_degraded");
    }
    trace.record(
        "triage",
        &envelope.normalized,
        routing.template.code(),
        serde_json::to_value(&routing).expect("routing serializes"),
        None,
    );

    if routing.level != RouteLevel::Pass {
        let mut text = render_template(routing.template, &envelope, ctx.templates, &mut trace)?;
        if ctx.same_day_addendum && routing.level == RouteLevel::SameDay {
            text = append_same_day_addendum(text, &envelope, ctx, &mut trace)?;
        }
        return Ok(FinalResponse {
            text,
            kind: ResponseKind::Template,
            sources: Vec::new(),
            routing,
            envelope,
            trace,
        });
    }

    // Retrieval on the original query; reranking on the English view.
    let (top_k, retrieval_trace) = retrieve_and_rerank(
        &envelope.normalized,
        envelope.english.as_deref(),
        envelope.stage,
        ctx.retrieval,
        ctx.indexes,
        ctx.embedder,
        ctx.reranker,
        ctx.store,
    )?;
    if retrieval_trace.rerank_fallback {
        trace.flag("rerank_fallback");
    }
    trace.record(
        "retrieval",
        &envelope.normalized,
        &top_k
            .ids()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(","),
        serde_json::to_value(&retrieval_trace).expect("trace serializes"),
        None,
    );

    // Evidence-grounded generation with bounded retries.
    let evidence: Vec<(String, String)> = top_k
        .ids()
        .filter_map(|id| ctx.store.get(id))
        .map(|c| (c.id.to_string(), c.text.clone()))
        .collect();
    let prompt = assemble_prompt(ctx.prompt_skeleton, &evidence, &envelope.normalized);
    let mut raw_generation = None;
    let mut last_error = String::new();
    let attempts = ctx.generation.max_retries.max(1);
    for _ in 0..attempts {
        match ctx.generator.generate(&prompt) {
            Ok(text) => {
                raw_generation = Some(text);
                break;
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    let raw_generation = raw_generation.ok_or(PipelineError::GenerationFailed {
        attempts,
        message: last_error,
    })?;

    let (label, body, malformed) = parse_leading_label(&raw_generation);
    if malformed {
        trace.flag("malformed_label");
    }
    let answer = GeneratedAnswer {
        label,
        body: body.clone(),
        cited_chunk_ids: top_k.ids().cloned().collect(),
        malformed,
    };
    trace.record(
        "generation",
        &prompt.question,
        &raw_generation,
        serde_json::json!({ "label": label.code(), "malformed": malformed }),
        None,
    );

    // Post-generation escalation check: any escalation label replaces the
    // generated text with the corresponding template and discards sources.
    if label != TemplateType::Pass {
        trace.record(
            "post_gen_escalation",
            label.code(),
            label.code(),
            serde_json::json!({ "escalated": true }),
            None,
        );
        let text = render_template(label, &envelope, ctx.templates, &mut trace)?;
        let routing = RoutingOutcome {
            level: label.level(),
            template: label,
            provenance: crate::triage::Provenance::Rule {
                rule_id: "post-generation-label".into(),
            },
            degraded: false,
        };
        return Ok(FinalResponse {
            text,
            kind: ResponseKind::Template,
            sources: Vec::new(),
            routing,
            envelope,
            trace,
        });
    }
    trace.record(
        "post_gen_escalation",
        label.code(),
        label.code(),
        serde_json::json!({ "escalated": false }),
        None,
    );

    Ok(FinalResponse {
        text: answer.body,
        kind: ResponseKind::Informational,
        sources: answer.cited_chunk_ids,
        routing,
        envelope,
        trace,
    })
}

/// Optional (off by default) evidence addendum for SAME-DAY templates. Runs
/// retrieval after the short-circuit; sources stay empty either way so
/// template purity holds.
fn append_same_day_addendum(
    template_text: String,
    envelope: &QueryEnvelope,
    ctx: &PipelineContext<'_>,
    trace: &mut PipelineTrace,
) -> Result<String, PipelineError> {
    let (top_k, _) = retrieve_and_rerank(
        &envelope.normalized,
        envelope.english.as_deref(),
        envelope.stage,
        ctx.retrieval,
        ctx.indexes,
        ctx.embedder,
        ctx.reranker,
        ctx.store,
    )?;
    trace.record(
        "same_day_addendum",
        &envelope.normalized,
        &top_k.len().to_string(),
        serde_json::json!({}),
        None,
    );
    let addendum = top_k
        .ids()
        .next()
        .and_then(|id| ctx.store.get(id))
        .map(|chunk| chunk.text.clone());
    match addendum {
        Some(text) => Ok(format!("{template_text}\n\n{text}")),
        None => Ok(template_text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("  hello   world ").unwrap(), "hello world");
    }

    #[test]
    fn normalize_strips_control_chars() {
        assert_eq!(normalize("a\u{0000}b").unwrap(), "ab");
    }

    #[test]
    fn normalize_rejects_empty() {
        assert!(matches!(normalize("   "), Err(PipelineError::EmptyQuery)));
    }

    #[test]
    fn normalize_preserves_scripts_and_punctuation() {
        assert_eq!(normalize("बुखार   है?").unwrap(), "बुखार है?");
    }

    #[test]
    fn label_parsing_schema_cases() {
        let (label, body, malformed) = parse_leading_label("PASS\nIron-rich foods include...");
        assert_eq!(label, TemplateType::Pass);
        assert_eq!(body, "Iron-rich foods include...");
        assert!(!malformed);

        let (label, body, malformed) = parse_leading_label("NOW-MED\nSeek care immediately.");
        assert_eq!(label, TemplateType::NowMed);
        assert_eq!(body, "Seek care immediately.");
        assert!(!malformed);
    }

    #[test]
    fn label_parsing_tolerates_whitespace() {
        let (label, _, malformed) = parse_leading_label("  SAME-DAY  \nrest");
        assert_eq!(label, TemplateType::SameDay);
        assert!(!malformed);
    }

    #[test]
    fn malformed_label_falls_back_to_pass_with_flag() {
        let (label, body, malformed) = parse_leading_label("Here is my answer...");
        assert_eq!(label, TemplateType::Pass);
        assert_eq!(body, "Here is my answer...");
        assert!(malformed);
        // Lowercase is not a valid label (case-sensitive contract).
        let (_, _, malformed) = parse_leading_label("pass\nbody");
        assert!(malformed);
    }

    #[test]
    fn template_lookup_falls_back_to_english() {
        let pack = TemplatePack::parse(concat!(
            r#"{"template":"SAME-DAY","lang":"en","text":"see a provider today"}"#,
            "\n",
            r#"{"template":"NOW-MED","lang":"en","text":"emergency now"}"#,
            "\n",
            r#"{"template":"NOW-MED","lang":"hi","text":"अभी अस्पताल जाएँ"}"#,
        ))
        .unwrap();
        let (text, fallback) = pack.lookup(TemplateType::SameDay, LanguageTag::Hi).unwrap();
        assert_eq!(text, "see a provider today");
        assert!(fallback);
        let (text, fallback) = pack.lookup(TemplateType::NowMed, LanguageTag::Hi).unwrap();
        assert_eq!(text, "अभी अस्पताल जाएँ");
        assert!(!fallback);
        assert!(matches!(
            pack.lookup(TemplateType::NowDv, LanguageTag::En),
            Err(PipelineError::UnknownTemplate(TemplateType::NowDv))
        ));
        assert!(matches!(
            pack.lookup(TemplateType::Pass, LanguageTag::En),
            Err(PipelineError::PassIsNotATemplate)
        ));
    }
}
