//! Provenance trace: one entry per pipeline step with input/output digests.
//!
//! Digests are short SHA-256 prefixes of a canonical rendering of the step's
//! inputs and outputs. Timings are opt-in so that default runs stay
//! byte-identical across invocations.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Short content digest for trace entries.
pub fn digest(content: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(content.as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: String,
    pub input_digest: String,
    pub output_digest: String,
    /// Step-specific payload (detected language, routing outcome, ranked
    /// lists, parsed label, ...).
    pub detail: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_micros: Option<u64>,
}

/// Whole-request trace in execution order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub steps: Vec<TraceStep>,
    /// Non-fatal degradations hit along the way (translation failure,
    /// encoder failure, malformed generation label, template language
    /// fallback, ...).
    pub flags: Vec<String>,
}

impl PipelineTrace {
    pub fn record(
        &mut self,
        step: &str,
        input: &str,
        output: &str,
        detail: serde_json::Value,
        elapsed_micros: Option<u64>,
    ) {
        self.steps.push(TraceStep {
            step: step.to_string(),
            input_digest: digest(input),
            output_digest: digest(output),
            detail,
            elapsed_micros,
        });
    }

    pub fn flag(&mut self, flag: &str) {
        self.flags.push(flag.to_string());
    }

    pub fn has_step(&self, step: &str) -> bool {
        self.steps.iter().any(|s| s.step == step)
    }

    pub fn step(&self, step: &str) -> Option<&TraceStep> {
        self.steps.iter().find(|s| s.step == step)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}
