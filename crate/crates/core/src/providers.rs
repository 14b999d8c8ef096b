//! Provider interfaces for everything that would be a model call in a live
//! deployment — embeddings, translation, reranking, generation, question
//! generation and evidence labeling — plus the deterministic test doubles
//! that ship with the engine.
//!
//! Every trait is object-safe and `Send + Sync`, so providers can be shared
//! across concurrent requests. A provider that is not deterministic must say
//! so via `deterministic()`; the benchmark builder and the CLI refuse to
//! promise byte-identical artifacts otherwise.

use std::collections::HashMap;

use thiserror::Error;

use crate::corpus::Chunk;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("translation failed for input: {original}")]
    Translation { original: String },
    #[error("rerank scoring failed: {0}")]
    Rerank(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("question generation failed: {0}")]
    QuestionGen(String),
    #[error("labeling failed: {0}")]
    Labeling(String),
}

/// Maps text to a fixed-dimension real vector, L2-normalized by the provider.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
    fn dimension(&self) -> usize;
    fn deterministic(&self) -> bool;
    /// Short identifier echoed into index snapshots for compatibility checks.
    fn id(&self) -> String;
}

/// Translates text into a target language ("en" in this pipeline).
/// Translating text already in the target language must return it unchanged.
pub trait TranslatorProvider: Send + Sync {
    fn translate(&self, text: &str, target: &str) -> Result<String, ProviderError>;
    fn deterministic(&self) -> bool;
}

/// Joint query–passage relevance scorer used by the rerank stage.
pub trait RerankScorer: Send + Sync {
    fn score(&self, query_en: &str, chunk_text: &str) -> Result<f64, ProviderError>;
    fn deterministic(&self) -> bool;
}

/// Prompt parts handed to a generator: system rules, labeled context chunks,
/// and the user question.
#[derive(Debug, Clone)]
pub struct PromptParts {
    pub system_rules: String,
    pub context: Vec<(String, String)>, // (chunk id, chunk text)
    pub question: String,
}

/// Produces the raw label-first answer text for a prompt.
pub trait GeneratorProvider: Send + Sync {
    fn generate(&self, prompt: &PromptParts) -> Result<String, ProviderError>;
    fn deterministic(&self) -> bool;
}

/// Produces a short user-style question answerable from the given chunks.
pub trait QuestionGenProvider: Send + Sync {
    fn generate_question(&self, chunks: &[&Chunk]) -> Result<String, ProviderError>;
    fn deterministic(&self) -> bool;
}

/// Evidence label assigned to a (question, chunk) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum EvidenceLabel {
    #[serde(rename = "DIRECT")]
    Direct,
    #[serde(rename = "RELATED")]
    Related,
    #[serde(rename = "IRRELEVANT")]
    Irrelevant,
}

impl std::fmt::Display for EvidenceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EvidenceLabel::Direct => "DIRECT",
            EvidenceLabel::Related => "RELATED",
            EvidenceLabel::Irrelevant => "IRRELEVANT",
        };
        f.write_str(s)
    }
}

/// Labels a candidate chunk against a question.
pub trait LabelerProvider: Send + Sync {
    fn label(&self, question: &str, chunk: &Chunk) -> Result<EvidenceLabel, ProviderError>;
    fn deterministic(&self) -> bool;
}

// ---------------------------------------------------------------------------
// Tokenization shared by the doubles and the sparse index.
// ---------------------------------------------------------------------------

/// Lowercase, Unicode-aware split on non-alphanumeric boundaries. No stemming,
/// no stopwords: the corpus is multilingual and stemming is language-specific.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

// ---------------------------------------------------------------------------
// Embedding doubles
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit over a token's bytes. Stable across runs and platforms
/// (unlike `DefaultHasher`, which is seeded per process).
fn fnv1a64(token: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in token.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Token-hash bag-of-words embedder: each token adds ±1 to one of `dim`
/// buckets (bucket and sign from a stable hash), then the vector is
/// L2-normalized. Deterministic and dependency-free; preserves
/// lexical-overlap geometry well enough for fixtures.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(64)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ProviderError::Embedding(format!(
                "no tokens in input: {text:?}"
            )));
        }
        let mut v = vec![0.0_f64; self.dim];
        for tok in &tokens {
            let h = fnv1a64(tok);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Signed counts cancelled exactly; fall back to a deterministic
            // unit vector keyed on the first token.
            let bucket = (fnv1a64(&tokens[0]) % self.dim as u64) as usize;
            v[bucket] = 1.0;
            return Ok(v);
        }
        for x in &mut v {
            *x /= norm;
        }
        Ok(v)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn id(&self) -> String {
        format!("hash-{}", self.dim)
    }
}

/// Test double mapping exact input strings to hand-set vectors. Vectors are
/// L2-normalized at insertion so cosine geometry can be dialed precisely.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    dim: usize,
    map: HashMap<String, Vec<f64>>,
}

impl TableEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            map: HashMap::new(),
        }
    }

    pub fn with(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 0.0, "zero vector");
        self.map
            .insert(text.into(), vector.iter().map(|x| x / norm).collect());
        self
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.map
            .get(text)
            .cloned()
            .ok_or_else(|| ProviderError::Embedding(format!("no vector for input: {text:?}")))
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn id(&self) -> String {
        format!("table-{}", self.dim)
    }
}

/// Always fails; exercises degraded paths.
#[derive(Debug, Clone, Default)]
pub struct FailingEmbedder;

impl EmbeddingProvider for FailingEmbedder {
    fn embed(&self, _text: &str) -> Result<Vec<f64>, ProviderError> {
        Err(ProviderError::Embedding("provider unavailable".into()))
    }

    fn dimension(&self) -> usize {
        0
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn id(&self) -> String {
        "failing".into()
    }
}

// ---------------------------------------------------------------------------
// Translator doubles
// ---------------------------------------------------------------------------

/// Returns the input unchanged for any target. Adequate for English-only
/// fixtures; identity on the target language holds trivially.
#[derive(Debug, Clone, Default)]
pub struct IdentityTranslator;

impl TranslatorProvider for IdentityTranslator {
    fn translate(&self, text: &str, _target: &str) -> Result<String, ProviderError> {
        Ok(text.to_string())
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Lookup-table translator loaded from a JSON object `{original: english}`.
/// Unknown inputs fail with the original query preserved in the error so
/// callers can degrade to original-language-only processing.
#[derive(Debug, Clone, Default)]
pub struct TableTranslator {
    map: HashMap<String, String>,
}

impl TableTranslator {
    pub fn new(map: HashMap<String, String>) -> Self {
        Self { map }
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        Ok(Self {
            map: serde_json::from_str(json)?,
        })
    }

    pub fn with(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.map.insert(from.into(), to.into());
        self
    }
}

impl TranslatorProvider for TableTranslator {
    fn translate(&self, text: &str, _target: &str) -> Result<String, ProviderError> {
        self.map
            .get(text)
            .cloned()
            .ok_or_else(|| ProviderError::Translation {
                original: text.to_string(),
            })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Always fails, preserving the original query in the error payload.
#[derive(Debug, Clone, Default)]
pub struct FailingTranslator;

impl TranslatorProvider for FailingTranslator {
    fn translate(&self, text: &str, _target: &str) -> Result<String, ProviderError> {
        Err(ProviderError::Translation {
            original: text.to_string(),
        })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Reranker doubles
// ---------------------------------------------------------------------------

/// Scores by cosine of hash-bag embeddings of query and chunk text — a
/// deterministic stand-in for a cross-encoder.
#[derive(Debug, Clone)]
pub struct OverlapReranker {
    embedder: HashEmbedder,
}

impl Default for OverlapReranker {
    fn default() -> Self {
        Self {
            embedder: HashEmbedder::default(),
        }
    }
}

impl RerankScorer for OverlapReranker {
    fn score(&self, query_en: &str, chunk_text: &str) -> Result<f64, ProviderError> {
        let q = self
            .embedder
            .embed(query_en)
            .map_err(|e| ProviderError::Rerank(e.to_string()))?;
        let c = self
            .embedder
            .embed(chunk_text)
            .map_err(|e| ProviderError::Rerank(e.to_string()))?;
        Ok(q.iter().zip(c.iter()).map(|(a, b)| a * b).sum())
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Returns the same score for every pair.
#[derive(Debug, Clone)]
pub struct ConstantReranker(pub f64);

impl RerankScorer for ConstantReranker {
    fn score(&self, _query_en: &str, _chunk_text: &str) -> Result<f64, ProviderError> {
        Ok(self.0)
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Scores from an exact-match table on chunk text; unknown text fails.
#[derive(Debug, Clone, Default)]
pub struct TableReranker {
    map: HashMap<String, f64>,
}

impl TableReranker {
    pub fn with(mut self, chunk_text: impl Into<String>, score: f64) -> Self {
        self.map.insert(chunk_text.into(), score);
        self
    }
}

impl RerankScorer for TableReranker {
    fn score(&self, _query_en: &str, chunk_text: &str) -> Result<f64, ProviderError> {
        self.map
            .get(chunk_text)
            .copied()
            .ok_or_else(|| ProviderError::Rerank(format!("no score for chunk: {chunk_text:?}")))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Always fails; the retrieval stage falls back to fused order.
#[derive(Debug, Clone, Default)]
pub struct FailingReranker;

impl RerankScorer for FailingReranker {
    fn score(&self, _query_en: &str, _chunk_text: &str) -> Result<f64, ProviderError> {
        Err(ProviderError::Rerank("provider unavailable".into()))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Generator doubles
// ---------------------------------------------------------------------------

/// Emits a fixed label on the first line and a grounded-looking body quoting
/// the first context chunk. The default generator for offline runs.
#[derive(Debug, Clone)]
pub struct GroundedGenerator;

impl GeneratorProvider for GroundedGenerator {
    fn generate(&self, prompt: &PromptParts) -> Result<String, ProviderError> {
        let mut body = String::from("PASS\n");
        match prompt.context.first() {
            Some((id, text)) => {
                let snippet: String = text.chars().take(200).collect();
                body.push_str(&format!(
                    "Based on the guidance provided [{id}]: {snippet}"
                ));
            }
            None => body.push_str(
                "I don't have enough information to answer that accurately. \
                 Please consult your health worker.",
            ),
        }
        Ok(body)
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Returns a fixed raw string regardless of the prompt; tests use it to force
/// specific labels (or malformed output) through the post-generation check.
#[derive(Debug, Clone)]
pub struct FixedGenerator(pub String);

impl GeneratorProvider for FixedGenerator {
    fn generate(&self, _prompt: &PromptParts) -> Result<String, ProviderError> {
        Ok(self.0.clone())
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Maps question text to a scripted raw output; unknown questions fail.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGenerator {
    map: HashMap<String, String>,
    fallback: Option<String>,
}

impl ScriptedGenerator {
    pub fn with(mut self, question: impl Into<String>, output: impl Into<String>) -> Self {
        self.map.insert(question.into(), output.into());
        self
    }

    pub fn with_fallback(mut self, output: impl Into<String>) -> Self {
        self.fallback = Some(output.into());
        self
    }
}

impl GeneratorProvider for ScriptedGenerator {
    fn generate(&self, prompt: &PromptParts) -> Result<String, ProviderError> {
        self.map
            .get(&prompt.question)
            .cloned()
            .or_else(|| self.fallback.clone())
            .ok_or_else(|| {
                ProviderError::Generation(format!("no scripted output for {:?}", prompt.question))
            })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Fails `failures` times, then succeeds with the given output. Exercises the
/// retry loop.
#[derive(Debug)]
pub struct FlakyGenerator {
    failures: std::sync::atomic::AtomicU32,
    output: String,
}

impl FlakyGenerator {
    pub fn new(failures: u32, output: impl Into<String>) -> Self {
        Self {
            failures: std::sync::atomic::AtomicU32::new(failures),
            output: output.into(),
        }
    }
}

impl GeneratorProvider for FlakyGenerator {
    fn generate(&self, _prompt: &PromptParts) -> Result<String, ProviderError> {
        let left = self.failures.load(std::sync::atomic::Ordering::SeqCst);
        if left > 0 {
            self.failures
                .store(left - 1, std::sync::atomic::Ordering::SeqCst);
            return Err(ProviderError::Generation("transient failure".into()));
        }
        Ok(self.output.clone())
    }

    fn deterministic(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Benchmark-builder doubles
// ---------------------------------------------------------------------------

/// Builds a question from the first few content-bearing tokens of the anchor
/// chunk. Deterministic.
#[derive(Debug, Clone, Default)]
pub struct TemplateQuestionGen;

impl QuestionGenProvider for TemplateQuestionGen {
    fn generate_question(&self, chunks: &[&Chunk]) -> Result<String, ProviderError> {
        let anchor = chunks
            .first()
            .ok_or_else(|| ProviderError::QuestionGen("no chunks supplied".into()))?;
        let tokens = tokenize(&anchor.text);
        let head: Vec<&str> = tokens.iter().map(|s| s.as_str()).take(5).collect();
        if head.is_empty() {
            return Err(ProviderError::QuestionGen("anchor has no tokens".into()));
        }
        Ok(format!("What does the guidance say about {}?", head.join(" ")))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Labels by hash-bag cosine between question and chunk text:
/// `>= direct_threshold` → DIRECT, `>= related_threshold` → RELATED,
/// otherwise IRRELEVANT.
#[derive(Debug, Clone)]
pub struct LexicalLabeler {
    embedder: HashEmbedder,
    pub direct_threshold: f64,
    pub related_threshold: f64,
}

impl LexicalLabeler {
    pub fn with_thresholds(direct_threshold: f64, related_threshold: f64) -> Self {
        Self {
            embedder: HashEmbedder::default(),
            direct_threshold,
            related_threshold,
        }
    }
}

impl Default for LexicalLabeler {
    fn default() -> Self {
        Self::with_thresholds(0.25, 0.10)
    }
}

impl LabelerProvider for LexicalLabeler {
    fn label(&self, question: &str, chunk: &Chunk) -> Result<EvidenceLabel, ProviderError> {
        let q = self
            .embedder
            .embed(question)
            .map_err(|e| ProviderError::Labeling(e.to_string()))?;
        let c = self
            .embedder
            .embed(&chunk.text)
            .map_err(|e| ProviderError::Labeling(e.to_string()))?;
        let cos: f64 = q.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
        Ok(if cos >= self.direct_threshold {
            EvidenceLabel::Direct
        } else if cos >= self.related_threshold {
            EvidenceLabel::Related
        } else {
            EvidenceLabel::Irrelevant
        })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Marks exactly one chunk id DIRECT and everything else IRRELEVANT; used to
/// exercise the minimum-DIRECT discard rule.
#[derive(Debug, Clone)]
pub struct SingleDirectLabeler(pub crate::corpus::ChunkId);

impl LabelerProvider for SingleDirectLabeler {
    fn label(&self, _question: &str, chunk: &Chunk) -> Result<EvidenceLabel, ProviderError> {
        Ok(if chunk.id == self.0 {
            EvidenceLabel::Direct
        } else {
            EvidenceLabel::Irrelevant
        })
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Labels from an explicit (question-agnostic) id→label table, defaulting to
/// IRRELEVANT.
#[derive(Debug, Clone, Default)]
pub struct TableLabeler {
    map: HashMap<crate::corpus::ChunkId, EvidenceLabel>,
}

impl TableLabeler {
    pub fn with(mut self, id: crate::corpus::ChunkId, label: EvidenceLabel) -> Self {
        self.map.insert(id, label);
        self
    }
}

impl LabelerProvider for TableLabeler {
    fn label(&self, _question: &str, chunk: &Chunk) -> Result<EvidenceLabel, ProviderError> {
        Ok(self
            .map
            .get(&chunk.id)
            .copied()
            .unwrap_or(EvidenceLabel::Irrelevant))
    }

    fn deterministic(&self) -> bool {
        true
    }
}
