//! Pre-generation safety routing.
//!
//! Routing runs three stages in fixed order and stops at the first hit:
//!
//! 1. high-precision rules for explicit emergency signals (with a negation
//!    guard and crisis-subtype classification),
//! 2. rules for clearly articulated same-day urgency,
//! 3. a semantic backstop over a stage-conditioned bank of canonical
//!    emergency-symptom descriptions, thresholded at `tau_now` / `tau_sd`.
//!
//! The asymmetry is structural: no code path maps a fired emergency rule to
//! pass-through, and raising a threshold can only demote outcomes. When the
//! English view or the encoder is unavailable the semantic stage is skipped
//! and only rules apply — degraded but safe, and flagged in the outcome.

use std::collections::BTreeSet;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{EmbeddingProvider, ProviderError};
use crate::stage::LifeStage;

/// Routing outcome level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RouteLevel {
    #[serde(rename = "EMERGENCY_NOW")]
    EmergencyNow,
    #[serde(rename = "SAME_DAY")]
    SameDay,
    #[serde(rename = "PASS")]
    Pass,
}

impl std::fmt::Display for RouteLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RouteLevel::EmergencyNow => "EMERGENCY_NOW",
            RouteLevel::SameDay => "SAME_DAY",
            RouteLevel::Pass => "PASS",
        };
        f.write_str(s)
    }
}

/// Response template selector. The three NOW-* subtypes select crisis
/// templates within EMERGENCY_NOW.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateType {
    #[serde(rename = "NOW-MH")]
    NowMh,
    #[serde(rename = "NOW-DV")]
    NowDv,
    #[serde(rename = "NOW-MED")]
    NowMed,
    #[serde(rename = "SAME-DAY")]
    SameDay,
    #[serde(rename = "PASS")]
    Pass,
}

impl TemplateType {
    pub fn code(&self) -> &'static str {
        match self {
            TemplateType::NowMh => "NOW-MH",
            TemplateType::NowDv => "NOW-DV",
            TemplateType::NowMed => "NOW-MED",
            TemplateType::SameDay => "SAME-DAY",
            TemplateType::Pass => "PASS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "NOW-MH" => Some(TemplateType::NowMh),
            "NOW-DV" => Some(TemplateType::NowDv),
            "NOW-MED" => Some(TemplateType::NowMed),
            "SAME-DAY" => Some(TemplateType::SameDay),
            "PASS" => Some(TemplateType::Pass),
            _ => None,
        }
    }

    pub fn level(&self) -> RouteLevel {
        match self {
            TemplateType::NowMh | TemplateType::NowDv | TemplateType::NowMed => {
                RouteLevel::EmergencyNow
            }
            TemplateType::SameDay => RouteLevel::SameDay,
            TemplateType::Pass => RouteLevel::Pass,
        }
    }
}

impl std::fmt::Display for TemplateType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// How a routing decision was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// A trigger rule fired.
    Rule { rule_id: String },
    /// The semantic backstop matched a canonical symptom.
    Semantic { canonical: String, similarity: f64 },
    /// Nothing fired; the query passes to retrieval and generation.
    Pass,
}

/// Triage outcome. Level and template are kept consistent by construction:
/// EMERGENCY_NOW carries a NOW-* subtype, SAME_DAY carries SAME-DAY, PASS
/// carries PASS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingOutcome {
    pub level: RouteLevel,
    pub template: TemplateType,
    pub provenance: Provenance,
    /// True when the semantic stage was skipped because the English view or
    /// the encoder was unavailable; rules still applied.
    pub degraded: bool,
}

impl RoutingOutcome {
    fn emergency(subtype: TemplateType, provenance: Provenance, degraded: bool) -> Self {
        debug_assert!(matches!(
            subtype,
            TemplateType::NowMh | TemplateType::NowDv | TemplateType::NowMed
        ));
        Self {
            level: RouteLevel::EmergencyNow,
            template: subtype,
            provenance,
            degraded,
        }
    }

    fn same_day(provenance: Provenance, degraded: bool) -> Self {
        Self {
            level: RouteLevel::SameDay,
            template: TemplateType::SameDay,
            provenance,
            degraded,
        }
    }

    fn pass(degraded: bool) -> Self {
        Self {
            level: RouteLevel::Pass,
            template: TemplateType::Pass,
            provenance: Provenance::Pass,
            degraded,
        }
    }
}

/// Severity level a trigger rule escalates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    #[serde(rename = "EMERGENCY_NOW")]
    Now,
    #[serde(rename = "SAME_DAY")]
    SameDay,
}

/// One trigger rule from the rule pack.
#[derive(Debug)]
pub struct TriggerRule {
    pub id: String,
    pub level: Severity,
    pub category: String,
    pub pattern: Regex,
    pub stages: BTreeSet<LifeStage>,
    /// A string that matches `pattern`; drives the pack's self-tests.
    pub example: String,
}

#[derive(Debug, Deserialize)]
struct RuleRecord {
    id: String,
    level: Severity,
    category: String,
    pattern: String,
    stages: Vec<LifeStage>,
    example: String,
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("cannot read pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("pack line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("rule {id}: pattern does not compile: {message}")]
    BadPattern { id: String, message: String },
    #[error("rule {id}: empty stage set")]
    EmptyStages { id: String },
    #[error("rule {id}: example does not match its own pattern")]
    ExampleMismatch { id: String },
    #[error("symptom bank has no entries for stage {0}")]
    EmptyBankForStage(LifeStage),
    #[error("invalid thresholds: need 0 < tau_sd < tau_now <= 1, got tau_now={tau_now} tau_sd={tau_sd}")]
    BadThresholds { tau_now: f64, tau_sd: f64 },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Rule pack in file order; first match wins within a severity level.
#[derive(Debug, Default)]
pub struct RulePack {
    rules: Vec<TriggerRule>,
}

impl RulePack {
    pub fn parse(jsonl: &str) -> Result<Self, TriageError> {
        let mut rules = Vec::new();
        for (idx, raw) in jsonl.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: RuleRecord =
                serde_json::from_str(raw).map_err(|e| TriageError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
            let pattern = RegexBuilder::new(&rec.pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| TriageError::BadPattern {
                    id: rec.id.clone(),
                    message: e.to_string(),
                })?;
            if rec.stages.is_empty() {
                return Err(TriageError::EmptyStages { id: rec.id });
            }
            if !pattern.is_match(&rec.example) {
                return Err(TriageError::ExampleMismatch { id: rec.id });
            }
            rules.push(TriggerRule {
                id: rec.id,
                level: rec.level,
                category: rec.category,
                pattern,
                stages: rec.stages.into_iter().collect(),
                example: rec.example,
            });
        }
        Ok(Self { rules })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, TriageError> {
        let contents = std::fs::read_to_string(path)?;
        Self::parse(&contents)
    }

    pub fn rules(&self) -> &[TriggerRule] {
        &self.rules
    }
}

/// Whole-word negation terms suppressing a trigger.
pub const NEGATION_TERMS: &[&str] = &["not", "no", "never", "without", "denies"];

/// Size of the look-behind window, in characters.
pub const NEGATION_WINDOW_CHARS: usize = 50;

/// True iff a whole-word negation term falls entirely within the 50
/// characters preceding `match_start` (a char index into `text`).
///
/// Words are scanned over the full text so a term half-cut by the window
/// boundary ("...cannot" → "not") can never count.
pub fn negation_guard(text: &str, match_start: usize) -> bool {
    let window_start = match_start.saturating_sub(NEGATION_WINDOW_CHARS);
    let chars: Vec<char> = text.chars().collect();
    let mut word = String::new();
    let mut word_start = 0usize;
    for (i, &ch) in chars.iter().enumerate().take(match_start) {
        if ch.is_alphanumeric() {
            if word.is_empty() {
                word_start = i;
            }
            word.extend(ch.to_lowercase());
        } else if !word.is_empty() {
            let word_end = i;
            if word_start >= window_start
                && word_end <= match_start
                && NEGATION_TERMS.contains(&word.as_str())
            {
                return true;
            }
            word.clear();
        }
    }
    if !word.is_empty()
        && word_start >= window_start
        && NEGATION_TERMS.contains(&word.as_str())
    {
        return true;
    }
    false
}

/// Byte offset → char index, for mapping regex match positions into the
/// character-based negation window.
fn char_index_of(text: &str, byte_offset: usize) -> usize {
    text[..byte_offset].chars().count()
}

/// First rule of the given severity whose stage set contains `stage` and
/// whose pattern has at least one un-negated occurrence in the query. Rules
/// are tried in pack file order; occurrences are scanned left to right, and
/// any un-negated occurrence fires (a negated first mention does not shadow
/// a later affirmative one).
pub fn rule_match<'p>(
    query: &str,
    stage: LifeStage,
    level: Severity,
    pack: &'p RulePack,
) -> Option<&'p TriggerRule> {
    for rule in &pack.rules {
        if rule.level != level || !rule.stages.contains(&stage) {
            continue;
        }
        for m in rule.pattern.find_iter(query) {
            let start_char = char_index_of(query, m.start());
            if !negation_guard(query, start_char) {
                return Some(rule);
            }
        }
    }
    None
}

/// One canonical symptom description with its embedding.
#[derive(Debug, Clone)]
pub struct BankEntry {
    pub stage: LifeStage,
    pub canonical_text: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct BankRecord {
    stage: LifeStage,
    canonical_text: String,
}

/// Stage-conditioned symptom bank with similarity thresholds. Vectors are
/// computed once at load time via the configured embedding provider.
#[derive(Debug)]
pub struct SemanticMatcher {
    entries: Vec<BankEntry>,
    pub tau_now: f64,
    pub tau_sd: f64,
}

impl SemanticMatcher {
    pub fn from_jsonl(
        jsonl: &str,
        provider: &dyn EmbeddingProvider,
        tau_now: f64,
        tau_sd: f64,
    ) -> Result<Self, TriageError> {
        if !(0.0 < tau_sd && tau_sd < tau_now && tau_now <= 1.0) {
            return Err(TriageError::BadThresholds { tau_now, tau_sd });
        }
        let mut entries = Vec::new();
        for (idx, raw) in jsonl.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let rec: BankRecord =
                serde_json::from_str(raw).map_err(|e| TriageError::Malformed {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            let vector = provider.embed(&rec.canonical_text)?;
            entries.push(BankEntry {
                stage: rec.stage,
                canonical_text: rec.canonical_text,
                vector,
            });
        }
        for stage in [
            LifeStage::MaternalPregnant,
            LifeStage::Postpartum,
            LifeStage::Newborn,
        ] {
            if !entries.iter().any(|e| e.stage == stage) {
                return Err(TriageError::EmptyBankForStage(stage));
            }
        }
        Ok(Self {
            entries,
            tau_now,
            tau_sd,
        })
    }

    pub fn load(
        path: impl AsRef<std::path::Path>,
        provider: &dyn EmbeddingProvider,
        tau_now: f64,
        tau_sd: f64,
    ) -> Result<Self, TriageError> {
        let contents = std::fs::read_to_string(path)?;
        Self::from_jsonl(&contents, provider, tau_now, tau_sd)
    }

    /// Build directly from entries (tests dial exact geometries this way).
    pub fn from_entries(
        entries: Vec<BankEntry>,
        tau_now: f64,
        tau_sd: f64,
    ) -> Result<Self, TriageError> {
        if !(0.0 < tau_sd && tau_sd < tau_now && tau_now <= 1.0) {
            return Err(TriageError::BadThresholds { tau_now, tau_sd });
        }
        Ok(Self {
            entries,
            tau_now,
            tau_sd,
        })
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Argmax cosine similarity of the query over the stage's bank (vectors are
/// unit norm, so the inner product is the cosine). Ties break by bank order.
pub fn semantic_match(
    query_en: &str,
    stage: LifeStage,
    matcher: &SemanticMatcher,
    provider: &dyn EmbeddingProvider,
) -> Result<(String, f64), TriageError> {
    let bank: Vec<&BankEntry> = matcher.entries.iter().filter(|e| e.stage == stage).collect();
    if bank.is_empty() {
        return Err(TriageError::EmptyBankForStage(stage));
    }
    let q = provider.embed(query_en)?;
    let mut best: Option<(&BankEntry, f64)> = None;
    for entry in bank {
        let sim: f64 = q.iter().zip(entry.vector.iter()).map(|(a, b)| a * b).sum();
        match best {
            Some((_, s)) if sim <= s => {}
            _ => best = Some((entry, sim)),
        }
    }
    let (entry, sim) = best.expect("bank checked non-empty");
    Ok((entry.canonical_text.clone(), sim))
}

/// Keyword fixtures for crisis-subtype classification (the deployed lists are
/// clinical-partner data; these cover the shipped rule pack).
const MH_KEYWORDS: &[&str] = &[
    "suicide",
    "suicidal",
    "kill myself",
    "want to die",
    "end my life",
    "ending my life",
    "can't go on",
    "cant go on",
    "no reason to live",
    "harm myself",
    "hurt myself",
    "hopeless",
];

const DV_KEYWORDS: &[&str] = &[
    "he hit",
    "he hits",
    "he hurt",
    "he hurts",
    "hit me",
    "hits me",
    "beat me",
    "beats me",
    "afraid of him",
    "afraid of my husband",
    "not safe at home",
    "violence at home",
    "threatens me",
];

/// Secondary keyword pass on the English view selecting the EMERGENCY_NOW
/// template: mental-health keywords first, then domestic violence, otherwise
/// the medical-emergency default.
pub fn classify_crisis_subtype(query_en: &str) -> TemplateType {
    let lower = query_en.to_lowercase();
    if MH_KEYWORDS.iter().any(|k| lower.contains(k)) {
        return TemplateType::NowMh;
    }
    if DV_KEYWORDS.iter().any(|k| lower.contains(k)) {
        return TemplateType::NowDv;
    }
    TemplateType::NowMed
}

/// Everything triage needs besides the query itself.
pub struct TriageContext<'a> {
    pub rules: &'a RulePack,
    pub matcher: Option<&'a SemanticMatcher>,
    pub encoder: Option<&'a dyn EmbeddingProvider>,
}

/// Pre-generation safety triage.
///
/// `query_en` is the English view when available; `None` degrades to
/// rules-only routing with the `degraded` flag set. Provenance is always
/// populated, so the ordering invariant (a fired emergency rule means the
/// semantic stage was never consulted) is auditable downstream.
pub fn pre_gen_triage(
    query: &str,
    query_en: Option<&str>,
    stage: LifeStage,
    _concerns: &crate::stage::ConcernTags,
    ctx: &TriageContext<'_>,
) -> RoutingOutcome {
    // Step 1: high-precision rules for explicit emergency signals.
    if let Some(rule) = rule_match(query, stage, Severity::Now, ctx.rules) {
        let subtype = match query_en {
            Some(en) => classify_crisis_subtype(en),
            None => classify_crisis_subtype(query),
        };
        return RoutingOutcome::emergency(
            subtype,
            Provenance::Rule {
                rule_id: rule.id.clone(),
            },
            false,
        );
    }

    // Step 2: clearly articulated same-day urgency.
    if let Some(rule) = rule_match(query, stage, Severity::SameDay, ctx.rules) {
        return RoutingOutcome::same_day(
            Provenance::Rule {
                rule_id: rule.id.clone(),
            },
            false,
        );
    }

    // Step 3: semantic backstop on the English view.
    let (matcher, encoder, query_en) = match (ctx.matcher, ctx.encoder, query_en) {
        (Some(m), Some(e), Some(q)) => (m, e, q),
        _ => return RoutingOutcome::pass(true),
    };
    match semantic_match(query_en, stage, matcher, encoder) {
        Ok((canonical, similarity)) => {
            if similarity >= matcher.tau_now {
                let subtype = classify_crisis_subtype(query_en);
                RoutingOutcome::emergency(
                    subtype,
                    Provenance::Semantic {
                        canonical,
                        similarity,
                    },
                    false,
                )
            } else if similarity >= matcher.tau_sd {
                RoutingOutcome::same_day(
                    Provenance::Semantic {
                        canonical,
                        similarity,
                    },
                    false,
                )
            } else {
                RoutingOutcome::pass(false)
            }
        }
        // Encoder failure degrades to pass-with-warning; generation-time
        // guardrails still apply downstream.
        Err(_) => RoutingOutcome::pass(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{HashEmbedder, TableEmbedder};

    fn small_pack() -> RulePack {
        let jsonl = r#"
{"id":"now-haem-1","level":"EMERGENCY_NOW","category":"haemorrhage","pattern":"heavy\\s+bleed(ing)?","stages":["maternal_pregnant","postpartum"],"example":"heavy bleeding"}
{"id":"now-haem-2","level":"EMERGENCY_NOW","category":"haemorrhage","pattern":"bleed(ing)?\\s+heavily","stages":["maternal_pregnant","postpartum"],"example":"bleeding heavily"}
{"id":"sd-mastitis-1","level":"SAME_DAY","category":"mastitis","pattern":"breast.*(red|pain).*fever","stages":["postpartum"],"example":"breast is red and painful, have fever"}
"#;
        RulePack::parse(jsonl).unwrap()
    }

    #[test]
    fn now_rule_matches_for_pregnant() {
        let pack = small_pack();
        let hit = rule_match(
            "Bleeding heavily since morning",
            LifeStage::MaternalPregnant,
            Severity::Now,
            &pack,
        );
        assert_eq!(hit.unwrap().id, "now-haem-2");
    }

    #[test]
    fn same_day_rule_respects_stage() {
        let pack = small_pack();
        let q = "Breast is red and painful, have fever";
        assert!(rule_match(q, LifeStage::Postpartum, Severity::SameDay, &pack).is_some());
        assert!(rule_match(q, LifeStage::MaternalPregnant, Severity::SameDay, &pack).is_none());
    }

    #[test]
    fn benign_query_matches_nothing() {
        let pack = small_pack();
        assert!(rule_match(
            "Mild back pain at 24 weeks",
            LifeStage::MaternalPregnant,
            Severity::Now,
            &pack
        )
        .is_none());
    }

    #[test]
    fn negation_guard_suppresses_in_window() {
        let text = "I have no heavy bleeding";
        let match_start = text.find("heavy").unwrap(); // ASCII: byte == char index
        assert!(negation_guard(text, match_start));
    }

    #[test]
    fn negation_guard_empty_window() {
        assert!(!negation_guard("bleeding heavily", 0));
    }

    #[test]
    fn negation_guard_window_arithmetic() {
        // Brute-force check around the 50-char boundary: a negation term
        // ending exactly at distance d from the match start suppresses iff
        // the whole word lies within the last 50 characters.
        for filler_len in [40usize, 47, 48, 49, 50, 51, 60] {
            let filler = "x".repeat(filler_len);
            let text = format!("no {filler} heavy bleeding");
            let match_start = text.chars().count() - "heavy bleeding".chars().count();
            // Word "no" spans chars [0, 2); in-window iff 0 >= match_start - 50.
            let expected = match_start <= 50;
            assert_eq!(
                negation_guard(&text, match_start),
                expected,
                "filler_len={filler_len} match_start={match_start}"
            );
        }
    }

    #[test]
    fn unnegated_occurrence_after_negated_one_fires() {
        let pack = small_pack();
        // The second occurrence sits more than 50 characters past the "no",
        // so it escapes the look-behind window and the rule fires.
        let q = "no heavy bleeding last month and everything stayed completely \
                 normal for weeks, but since this morning heavy bleeding started";
        assert!(rule_match(q, LifeStage::MaternalPregnant, Severity::Now, &pack).is_some());
        // Same rule, but every occurrence negated in-window: suppressed.
        let q2 = "I have no heavy bleeding";
        assert!(rule_match(q2, LifeStage::MaternalPregnant, Severity::Now, &pack).is_none());
    }

    #[test]
    fn semantic_match_identical_vector_is_one() {
        let provider = TableEmbedder::new(4)
            .with("query", vec![1.0, 0.0, 0.0, 0.0])
            .with("bank-a", vec![1.0, 0.0, 0.0, 0.0]);
        let matcher = SemanticMatcher::from_entries(
            vec![BankEntry {
                stage: LifeStage::MaternalPregnant,
                canonical_text: "bank-a".into(),
                vector: provider.embed("bank-a").unwrap(),
            }],
            0.5,
            0.3,
        )
        .unwrap();
        let (canonical, sim) =
            semantic_match("query", LifeStage::MaternalPregnant, &matcher, &provider).unwrap();
        assert_eq!(canonical, "bank-a");
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semantic_match_orthogonal_is_zero() {
        let provider = TableEmbedder::new(4)
            .with("query", vec![1.0, 0.0, 0.0, 0.0])
            .with("bank-a", vec![0.0, 1.0, 0.0, 0.0]);
        let matcher = SemanticMatcher::from_entries(
            vec![BankEntry {
                stage: LifeStage::MaternalPregnant,
                canonical_text: "bank-a".into(),
                vector: provider.embed("bank-a").unwrap(),
            }],
            0.5,
            0.3,
        )
        .unwrap();
        let (_, sim) =
            semantic_match("query", LifeStage::MaternalPregnant, &matcher, &provider).unwrap();
        assert!(sim.abs() < 1e-12);
    }

    #[test]
    fn semantic_argmax_matches_brute_force() {
        let provider = TableEmbedder::new(3)
            .with("query", vec![0.6, 0.8, 0.0])
            .with("a", vec![1.0, 0.0, 0.0])
            .with("b", vec![0.0, 1.0, 0.0])
            .with("c", vec![0.707, 0.707, 0.0]);
        let entries: Vec<BankEntry> = ["a", "b", "c"]
            .iter()
            .map(|t| BankEntry {
                stage: LifeStage::MaternalPregnant,
                canonical_text: (*t).into(),
                vector: provider.embed(t).unwrap(),
            })
            .collect();
        // Brute force over all entries.
        let q = provider.embed("query").unwrap();
        let brute = entries
            .iter()
            .map(|e| {
                (
                    e.canonical_text.clone(),
                    q.iter().zip(e.vector.iter()).map(|(a, b)| a * b).sum::<f64>(),
                )
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let matcher = SemanticMatcher::from_entries(entries, 0.5, 0.3).unwrap();
        let got =
            semantic_match("query", LifeStage::MaternalPregnant, &matcher, &provider).unwrap();
        assert_eq!(got.0, brute.0);
        assert!((got.1 - brute.1).abs() < 1e-12);
    }

    #[test]
    fn subtype_classification_order() {
        assert_eq!(classify_crisis_subtype("I can't go on anymore"), TemplateType::NowMh);
        assert_eq!(classify_crisis_subtype("he hit me and I am afraid"), TemplateType::NowDv);
        assert_eq!(classify_crisis_subtype("bleeding heavily"), TemplateType::NowMed);
    }

    fn empty_concerns() -> crate::stage::ConcernTags {
        Default::default()
    }

    #[test]
    fn triage_now_rule_short_circuits_semantic() {
        let pack = small_pack();
        // Encoder would panic if consulted: FailingEmbedder errors, but a
        // panicking assertion is stronger — use a TableEmbedder with no
        // entries so any embed call errors out, then check provenance.
        let provider = TableEmbedder::new(4);
        let matcher = SemanticMatcher::from_entries(
            vec![BankEntry {
                stage: LifeStage::MaternalPregnant,
                canonical_text: "x".into(),
                vector: vec![1.0, 0.0, 0.0, 0.0],
            }],
            0.5,
            0.3,
        )
        .unwrap();
        let ctx = TriageContext {
            rules: &pack,
            matcher: Some(&matcher),
            encoder: Some(&provider),
        };
        let out = pre_gen_triage(
            "heavy bleeding",
            Some("heavy bleeding"),
            LifeStage::MaternalPregnant,
            &empty_concerns(),
            &ctx,
        );
        assert_eq!(out.level, RouteLevel::EmergencyNow);
        assert_eq!(out.template, TemplateType::NowMed);
        assert!(matches!(out.provenance, Provenance::Rule { .. }));
        assert!(!out.degraded);
    }

    #[test]
    fn triage_semantic_threshold_55_routes_emergency() {
        // Dot product dialed to exactly 0.55 against tau_now = 0.50.
        let pack = RulePack::parse("").unwrap();
        let provider = TableEmbedder::new(2)
            .with("paraphrased danger", vec![1.0, 0.0])
            .with("canon", vec![0.55, (1.0_f64 - 0.55 * 0.55).sqrt()]);
        let matcher = SemanticMatcher::from_entries(
            vec![BankEntry {
                stage: LifeStage::MaternalPregnant,
                canonical_text: "canon".into(),
                vector: provider.embed("canon").unwrap(),
            }],
            0.5,
            0.3,
        )
        .unwrap();
        let ctx = TriageContext {
            rules: &pack,
            matcher: Some(&matcher),
            encoder: Some(&provider),
        };
        let out = pre_gen_triage(
            "paraphrased danger",
            Some("paraphrased danger"),
            LifeStage::MaternalPregnant,
            &empty_concerns(),
            &ctx,
        );
        assert_eq!(out.level, RouteLevel::EmergencyNow);
        match out.provenance {
            Provenance::Semantic { similarity, .. } => assert!((similarity - 0.55).abs() < 1e-12),
            other => panic!("expected semantic provenance, got {other:?}"),
        }
    }

    #[test]
    fn triage_degrades_to_pass_without_english_view() {
        let pack = RulePack::parse("").unwrap();
        let embedder = HashEmbedder::default();
        let ctx = TriageContext {
            rules: &pack,
            matcher: None,
            encoder: Some(&embedder),
        };
        let out = pre_gen_triage(
            "कुछ पूछना है",
            None,
            LifeStage::MaternalPregnant,
            &empty_concerns(),
            &ctx,
        );
        assert_eq!(out.level, RouteLevel::Pass);
        assert!(out.degraded);
    }

    #[test]
    fn threshold_monotonicity_raising_tau_now_only_demotes() {
        let provider = TableEmbedder::new(2)
            .with("q", vec![1.0, 0.0])
            .with("canon", vec![0.55, (1.0_f64 - 0.55 * 0.55).sqrt()]);
        let entry = BankEntry {
            stage: LifeStage::MaternalPregnant,
            canonical_text: "canon".into(),
            vector: provider.embed("canon").unwrap(),
        };
        let pack = RulePack::parse("").unwrap();
        let mut prev_rank = 3;
        for tau_now in [0.40, 0.50, 0.56, 0.90] {
            let matcher =
                SemanticMatcher::from_entries(vec![entry.clone()], tau_now, 0.3).unwrap();
            let ctx = TriageContext {
                rules: &pack,
                matcher: Some(&matcher),
                encoder: Some(&provider),
            };
            let out = pre_gen_triage(
                "q",
                Some("q"),
                LifeStage::MaternalPregnant,
                &empty_concerns(),
                &ctx,
            );
            let rank = match out.level {
                RouteLevel::EmergencyNow => 3,
                RouteLevel::SameDay => 2,
                RouteLevel::Pass => 1,
            };
            assert!(rank <= prev_rank, "raising tau_now promoted an outcome");
            prev_rank = rank;
        }
    }

    #[test]
    fn rule_pack_rejects_bad_records() {
        let bad_pattern = r#"{"id":"x","level":"EMERGENCY_NOW","category":"c","pattern":"(","stages":["maternal_pregnant"],"example":"x"}"#;
        assert!(matches!(
            RulePack::parse(bad_pattern),
            Err(TriageError::BadPattern { .. })
        ));
        let no_stages = r#"{"id":"x","level":"EMERGENCY_NOW","category":"c","pattern":"a","stages":[],"example":"a"}"#;
        assert!(matches!(
            RulePack::parse(no_stages),
            Err(TriageError::EmptyStages { .. })
        ));
        let bad_example = r#"{"id":"x","level":"EMERGENCY_NOW","category":"c","pattern":"abc","stages":["maternal_pregnant"],"example":"zzz"}"#;
        assert!(matches!(
            RulePack::parse(bad_example),
            Err(TriageError::ExampleMismatch { .. })
        ));
    }
}
