//! Life-stage inference and lightweight concern tags.
//!
//! Stage detection is pattern-based and data-driven: the pattern pack is a
//! JSONL file mixing `{"pattern": ..., "stage": ...}` records (compiled
//! case-insensitive) with `{"keyword": ..., "concern_tag": ...}` records, so
//! clinical partners can edit both without touching code. Metadata fields
//! supplied by the host platform take precedence over text cues; queries with
//! no matching cue default to `maternal_pregnant`.

use std::collections::BTreeSet;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Life stage conditioning triage and retrieval provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LifeStage {
    #[serde(rename = "maternal_pregnant")]
    MaternalPregnant,
    #[serde(rename = "postpartum")]
    Postpartum,
    #[serde(rename = "newborn")]
    Newborn,
}

impl LifeStage {
    pub fn code(&self) -> &'static str {
        match self {
            LifeStage::MaternalPregnant => "maternal_pregnant",
            LifeStage::Postpartum => "postpartum",
            LifeStage::Newborn => "newborn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "maternal_pregnant" | "pregnant" => Some(LifeStage::MaternalPregnant),
            "postpartum" => Some(LifeStage::Postpartum),
            "newborn" => Some(LifeStage::Newborn),
            _ => None,
        }
    }
}

impl std::fmt::Display for LifeStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Optional platform-supplied context; any populated field overrides text
/// cues. Checked in order newborn_age_days, postpartum_weeks,
/// gestational_week when more than one is (unexpectedly) set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gestational_week: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postpartum_weeks: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newborn_age_days: Option<u32>,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("gestational_week {0} outside 1–45")]
    GestationalWeekOutOfRange(u8),
    #[error("cannot read pattern pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("pattern pack line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("pattern pack line {line}: regex does not compile: {message}")]
    BadPattern { line: usize, message: String },
}

impl PlatformMetadata {
    pub fn validate(&self) -> Result<(), StageError> {
        if let Some(w) = self.gestational_week {
            if !(1..=45).contains(&w) {
                return Err(StageError::GestationalWeekOutOfRange(w));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.gestational_week.is_none()
            && self.postpartum_weeks.is_none()
            && self.newborn_age_days.is_none()
    }
}

/// Concern tags from the fixed vocabulary; extraction feeds triage provenance
/// only (triage rules fire independently of tags).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcernTag {
    Bleeding,
    Fever,
    HeadacheVision,
    FetalMovement,
    MentalHealth,
    DomesticViolence,
    Breastfeeding,
    Wound,
    BreathingChest,
    Other,
}

/// Ordered set for deterministic serialization.
pub type ConcernTags = BTreeSet<ConcernTag>;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PackRecord {
    Stage { pattern: String, stage: LifeStage },
    Concern { keyword: String, concern_tag: ConcernTag },
}

/// Compiled stage patterns and concern keywords, immutable after load.
#[derive(Debug)]
pub struct PatternPack {
    stage_rules: Vec<(Regex, LifeStage)>,
    concern_rules: Vec<(Regex, ConcernTag)>,
}

fn compile_ci(pattern: &str, line: usize) -> Result<Regex, StageError> {
    RegexBuilder::new(pattern)
        .case_insensitive(true)
        .build()
        .map_err(|e| StageError::BadPattern {
            line,
            message: e.to_string(),
        })
}

impl PatternPack {
    pub fn parse(jsonl: &str) -> Result<Self, StageError> {
        let mut stage_rules = Vec::new();
        let mut concern_rules = Vec::new();
        for (idx, raw) in jsonl.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: PackRecord =
                serde_json::from_str(raw).map_err(|e| StageError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
            match record {
                PackRecord::Stage { pattern, stage } => {
                    // Keyword records are compiled as whole-word prefixes so
                    // "bleed" covers "bleeding"; stage records are used as-is.
                    stage_rules.push((compile_ci(&pattern, line)?, stage));
                }
                PackRecord::Concern { keyword, concern_tag } => {
                    let pattern = format!(r"\b{}", regex::escape(&keyword));
                    concern_rules.push((compile_ci(&pattern, line)?, concern_tag));
                }
            }
        }
        Ok(Self {
            stage_rules,
            concern_rules,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, StageError> {
        let contents = std::fs::read_to_string(path)?;
        Self::parse(&contents)
    }

    pub fn stage_rules(&self) -> impl Iterator<Item = (&Regex, LifeStage)> {
        self.stage_rules.iter().map(|(r, s)| (r, *s))
    }
}

/// Infer life stage from platform metadata (which wins) or text cues.
///
/// When cues for several stages match, the more specific stage wins:
/// newborn over postpartum over pregnancy — postpartum mentions ("since
/// delivery") and newborn mentions ("baby not feeding") are narrower signals
/// than residual pregnancy vocabulary. No cue at all defaults to
/// `maternal_pregnant`. Total and deterministic.
pub fn extract_stage(query: &str, meta: &PlatformMetadata, pack: &PatternPack) -> LifeStage {
    if meta.newborn_age_days.is_some() {
        return LifeStage::Newborn;
    }
    if meta.postpartum_weeks.is_some() {
        return LifeStage::Postpartum;
    }
    if meta.gestational_week.is_some() {
        return LifeStage::MaternalPregnant;
    }
    let mut matched: BTreeSet<LifeStage> = BTreeSet::new();
    for (re, stage) in &pack.stage_rules {
        if re.is_match(query) {
            matched.insert(*stage);
        }
    }
    if matched.contains(&LifeStage::Newborn) {
        LifeStage::Newborn
    } else if matched.contains(&LifeStage::Postpartum) {
        LifeStage::Postpartum
    } else {
        LifeStage::MaternalPregnant
    }
}

/// Deterministic keyword-to-tag mapping; unknown content yields the empty
/// set. The stage parameter is accepted for interface stability but the
/// shipped mapping is stage-independent.
pub fn extract_concerns(query: &str, _stage: LifeStage, pack: &PatternPack) -> ConcernTags {
    let mut tags = ConcernTags::new();
    for (re, tag) in &pack.concern_rules {
        if re.is_match(query) {
            tags.insert(*tag);
        }
    }
    tags
}
