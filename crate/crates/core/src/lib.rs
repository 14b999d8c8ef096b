//! Safety-first routing and hybrid retrieval engine for maternal-health queries.
//!
//! The crate is organised around the request path:
//!
//! - [`corpus`] — load and serve the chunked guideline corpus (JSONL).
//! - [`lang`] — script-based language detection and the English view of a query.
//! - [`stage`] — life-stage inference (pregnancy / postpartum / newborn) and
//!   lightweight concern tags, driven by an editable pattern pack.
//! - [`triage`] — pre-generation safety routing: high-precision rules with a
//!   negation guard, a semantic backstop over a canonical symptom bank, and
//!   crisis-subtype classification.
//! - [`retrieval`] — BM25, flat dense retrieval, reciprocal rank fusion,
//!   deduplication and reranking behind pluggable providers.
//! - [`pipeline`] — end-to-end orchestration: triage short-circuit to
//!   templates, evidence-grounded generation, post-generation escalation.
//! - [`benchgen`] — synthetic multi-evidence benchmark construction with
//!   chunk-level DIRECT / RELATED / IRRELEVANT labels.
//! - [`evalkit`] — ranking metrics, triage scoring, agreement statistics
//!   (quadratic-weighted kappa, MAE), Wilson intervals, paired t-tests.
//!
//! All model inference (generation, embedding, translation, judging) sits
//! behind the provider traits in [`providers`]; the shipped implementations
//! are deterministic test doubles, so every code path here is reproducible
//! offline.

pub mod benchgen;
pub mod config;
pub mod corpus;
pub mod evalkit;
pub mod lang;
pub mod pipeline;
pub mod providers;
pub mod retrieval;
pub mod scored;
pub mod stage;
pub mod trace;
pub mod triage;

pub use corpus::{Chunk, ChunkId, ChunkStore};
pub use lang::LanguageTag;
pub use scored::ScoredList;
pub use stage::{ConcernTag, LifeStage, PlatformMetadata};
pub use triage::{RouteLevel, RoutingOutcome, TemplateType};
