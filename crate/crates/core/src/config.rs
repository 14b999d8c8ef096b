//! Run configuration, provider selection, engine assembly and index
//! snapshots.
//!
//! The config file is a single JSON document; omitted fields take the
//! deployed defaults (retrieval depths 15/60/7/7, thresholds 0.50/0.30,
//! temperature 0.1, 3 retries, 60 s timeout). Pack paths are resolved
//! relative to the config file's directory so a fixture tree is relocatable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{load_corpus, ChunkStore};
use crate::pipeline::{GenerationConfig, PipelineContext, TemplatePack};
use crate::providers::{
    EmbeddingProvider, FailingReranker, FailingTranslator, FixedGenerator, GeneratorProvider,
    GroundedGenerator, HashEmbedder, IdentityTranslator, OverlapReranker, RerankScorer,
    TableTranslator, TranslatorProvider,
};
use crate::retrieval::{
    build_bm25_index, build_dense_index, DenseIndex, Indexes, RetrievalConfig, SparseIndex,
};
use crate::stage::PatternPack;
use crate::triage::{RulePack, SemanticMatcher, TriageContext};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Stage(#[from] crate::stage::StageError),
    #[error(transparent)]
    Triage(#[from] crate::triage::TriageError),
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::RetrievalError),
    #[error("missing index snapshot: {0}")]
    MissingSnapshot(PathBuf),
    #[error("snapshot incompatible with config: {0}")]
    SnapshotMismatch(String),
}

/// Embedding provider selection. The hash embedder is the deterministic
/// default; a live deployment would add a real provider variant here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderChoice {
    Hash { dim: usize },
}

impl Default for EmbedderChoice {
    fn default() -> Self {
        EmbedderChoice::Hash { dim: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranslatorChoice {
    #[default]
    Identity,
    Table {
        path: PathBuf,
    },
    Failing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RerankerChoice {
    #[default]
    Overlap,
    None,
    Failing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorChoice {
    #[default]
    Grounded,
    Fixed {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProviderConfig {
    #[serde(default)]
    pub embedder: EmbedderChoice,
    #[serde(default)]
    pub translator: TranslatorChoice,
    #[serde(default)]
    pub reranker: RerankerChoice,
    #[serde(default)]
    pub generator: GeneratorChoice,
}

fn default_tau_now() -> f64 {
    0.50
}

fn default_tau_sd() -> f64 {
    0.30
}

fn default_seed() -> u64 {
    42
}

/// The whole run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub pattern_pack: PathBuf,
    pub rule_pack: PathBuf,
    pub symptom_bank: PathBuf,
    pub template_pack: PathBuf,
    pub prompt_skeleton: PathBuf,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default = "default_tau_now")]
    pub tau_now: f64,
    #[serde(default = "default_tau_sd")]
    pub tau_sd: f64,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub providers: ProviderConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub same_day_addendum: bool,
}

impl RunConfig {
    /// Load and resolve relative paths against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig = serde_json::from_str(&contents)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.corpus);
        resolve(&mut self.pattern_pack);
        resolve(&mut self.rule_pack);
        resolve(&mut self.symptom_bank);
        resolve(&mut self.template_pack);
        resolve(&mut self.prompt_skeleton);
        if let TranslatorChoice::Table { path } = &mut self.providers.translator {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

pub fn make_embedder(choice: &EmbedderChoice) -> Box<dyn EmbeddingProvider> {
    match choice {
        EmbedderChoice::Hash { dim } => Box::new(HashEmbedder::new(*dim)),
    }
}

pub fn make_translator(
    choice: &TranslatorChoice,
) -> Result<Box<dyn TranslatorProvider>, ConfigError> {
    Ok(match choice {
        TranslatorChoice::Identity => Box::new(IdentityTranslator),
        TranslatorChoice::Table { path } => {
            let contents = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            Box::new(TableTranslator::from_json(&contents)?)
        }
        TranslatorChoice::Failing => Box::new(FailingTranslator),
    })
}

pub fn make_reranker(choice: &RerankerChoice) -> Option<Box<dyn RerankScorer>> {
    match choice {
        RerankerChoice::Overlap => Some(Box::new(OverlapReranker::default())),
        RerankerChoice::None => None,
        RerankerChoice::Failing => Some(Box::new(FailingReranker)),
    }
}

pub fn make_generator(choice: &GeneratorChoice) -> Box<dyn GeneratorProvider> {
    match choice {
        GeneratorChoice::Grounded => Box::new(GroundedGenerator),
        GeneratorChoice::Fixed { text } => Box::new(FixedGenerator(text.clone())),
    }
}

/// SHA-256 hex digest of a file's bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String, ConfigError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// SHA-256 hex digest of in-memory content.
pub fn content_digest(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

/// Snapshot manifest written next to the sparse/dense index files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub corpus_digest: String,
    pub embedder_id: String,
    pub embedder_dim: usize,
    pub retrieval: RetrievalConfig,
    pub sparse_digest: String,
    pub dense_digest: String,
}

pub struct SnapshotPaths {
    pub manifest: PathBuf,
    pub sparse: PathBuf,
    pub dense: PathBuf,
}

impl SnapshotPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            manifest: dir.join("index-manifest.json"),
            sparse: dir.join("sparse-index.json"),
            dense: dir.join("dense-index.json"),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ConfigError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ConfigError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Build both indexes from the corpus and persist them with a manifest.
/// Returns the manifest (whose digests let callers detect no-op rebuilds).
pub fn write_index_snapshots(
    config: &RunConfig,
    dir: &Path,
) -> Result<IndexManifest, ConfigError> {
    let store = load_corpus(&config.corpus)?;
    let embedder = make_embedder(&config.providers.embedder);
    let sparse = build_bm25_index(&store, &config.retrieval)?;
    let dense = build_dense_index(&store, embedder.as_ref())?;

    let sparse_json = serde_json::to_string(&sparse)?;
    let dense_json = serde_json::to_string(&dense)?;
    let manifest = IndexManifest {
        format_version: SNAPSHOT_FORMAT_VERSION,
        corpus_digest: file_digest(&config.corpus)?,
        embedder_id: embedder.id(),
        embedder_dim: embedder.dimension(),
        retrieval: config.retrieval.clone(),
        sparse_digest: content_digest(&sparse_json),
        dense_digest: content_digest(&dense_json),
    };
    let paths = SnapshotPaths::in_dir(dir);
    write_file(&paths.sparse, &sparse_json)?;
    write_file(&paths.dense, &dense_json)?;
    write_file(&paths.manifest, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Load index snapshots, verifying format version, corpus digest, embedder
/// identity and BM25 parameters against the config.
pub fn load_index_snapshots(config: &RunConfig, dir: &Path) -> Result<Indexes, ConfigError> {
    let paths = SnapshotPaths::in_dir(dir);
    for p in [&paths.manifest, &paths.sparse, &paths.dense] {
        if !p.exists() {
            return Err(ConfigError::MissingSnapshot(p.clone()));
        }
    }
    let manifest: IndexManifest = serde_json::from_str(&std::fs::read_to_string(
        &paths.manifest,
    )
    .map_err(|source| ConfigError::Io {
        path: paths.manifest.clone(),
        source,
    })?)?;
    if manifest.format_version != SNAPSHOT_FORMAT_VERSION {
        return Err(ConfigError::SnapshotMismatch(format!(
            "format version {} (expected {})",
            manifest.format_version, SNAPSHOT_FORMAT_VERSION
        )));
    }
    let corpus_digest = file_digest(&config.corpus)?;
    if manifest.corpus_digest != corpus_digest {
        return Err(ConfigError::SnapshotMismatch(
            "corpus changed since indexing".to_string(),
        ));
    }
    let embedder = make_embedder(&config.providers.embedder);
    if manifest.embedder_id != embedder.id() || manifest.embedder_dim != embedder.dimension() {
        return Err(ConfigError::SnapshotMismatch(format!(
            "embedder {} (dim {}) does not match snapshot {} (dim {})",
            embedder.id(),
            embedder.dimension(),
            manifest.embedder_id,
            manifest.embedder_dim
        )));
    }
    if manifest.retrieval.bm25_k1 != config.retrieval.bm25_k1
        || manifest.retrieval.bm25_b != config.retrieval.bm25_b
    {
        return Err(ConfigError::SnapshotMismatch(
            "BM25 parameters differ from snapshot".to_string(),
        ));
    }
    let sparse: SparseIndex = serde_json::from_str(&std::fs::read_to_string(&paths.sparse)
        .map_err(|source| ConfigError::Io {
            path: paths.sparse.clone(),
            source,
        })?)?;
    let dense: DenseIndex = serde_json::from_str(&std::fs::read_to_string(&paths.dense)
        .map_err(|source| ConfigError::Io {
            path: paths.dense.clone(),
            source,
        })?)?;
    Ok(Indexes { sparse, dense })
}

/// Fully assembled engine owning packs, indexes and providers.
pub struct Engine {
    pub store: ChunkStore,
    pub patterns: PatternPack,
    pub rules: RulePack,
    pub matcher: SemanticMatcher,
    pub templates: TemplatePack,
    pub prompt_skeleton: String,
    pub retrieval: RetrievalConfig,
    pub generation: GenerationConfig,
    pub indexes: Indexes,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub translator: Box<dyn TranslatorProvider>,
    pub reranker: Option<Box<dyn RerankScorer>>,
    pub generator: Box<dyn GeneratorProvider>,
    pub same_day_addendum: bool,
}

impl Engine {
    /// Build everything from a config, embedding the corpus in-process.
    pub fn build(config: &RunConfig) -> Result<Self, ConfigError> {
        let store = load_corpus(&config.corpus)?;
        let embedder = make_embedder(&config.providers.embedder);
        let sparse = build_bm25_index(&store, &config.retrieval)?;
        let dense = build_dense_index(&store, embedder.as_ref())?;
        Self::assemble(config, store, Indexes { sparse, dense }, embedder)
    }

    /// Build against previously persisted index snapshots.
    pub fn with_snapshots(config: &RunConfig, dir: &Path) -> Result<Self, ConfigError> {
        let store = load_corpus(&config.corpus)?;
        let indexes = load_index_snapshots(config, dir)?;
        let embedder = make_embedder(&config.providers.embedder);
        Self::assemble(config, store, indexes, embedder)
    }

    fn assemble(
        config: &RunConfig,
        store: ChunkStore,
        indexes: Indexes,
        embedder: Box<dyn EmbeddingProvider>,
    ) -> Result<Self, ConfigError> {
        config.retrieval.validate()?;
        let patterns = PatternPack::load(&config.pattern_pack)?;
        let rules = RulePack::load(&config.rule_pack)?;
        let matcher = SemanticMatcher::load(
            &config.symptom_bank,
            embedder.as_ref(),
            config.tau_now,
            config.tau_sd,
        )?;
        let templates = TemplatePack::load(&config.template_pack)?;
        let prompt_skeleton = std::fs::read_to_string(&config.prompt_skeleton).map_err(
            |source| ConfigError::Io {
                path: config.prompt_skeleton.clone(),
                source,
            },
        )?;
        Ok(Self {
            store,
            patterns,
            rules,
            matcher,
            templates,
            prompt_skeleton,
            retrieval: config.retrieval.clone(),
            generation: config.generation.clone(),
            indexes,
            embedder,
            translator: make_translator(&config.providers.translator)?,
            reranker: make_reranker(&config.providers.reranker),
            generator: make_generator(&config.providers.generator),
            same_day_addendum: config.same_day_addendum,
        })
    }

    pub fn triage_context(&self) -> TriageContext<'_> {
        TriageContext {
            rules: &self.rules,
            matcher: Some(&self.matcher),
            encoder: Some(self.embedder.as_ref()),
        }
    }

    pub fn pipeline_context(&self) -> PipelineContext<'_> {
        PipelineContext {
            patterns: &self.patterns,
            triage: self.triage_context(),
            templates: &self.templates,
            prompt_skeleton: &self.prompt_skeleton,
            retrieval: &self.retrieval,
            generation: &self.generation,
            indexes: &self.indexes,
            store: &self.store,
            embedder: self.embedder.as_ref(),
            translator: self.translator.as_ref(),
            reranker: self.reranker.as_deref(),
            generator: self.generator.as_ref(),
            same_day_addendum: self.same_day_addendum,
        }
    }
}
