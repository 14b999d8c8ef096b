//! Quantitative evaluation kit: retrieval ranking metrics over DIRECT
//! labels, triage benchmark scoring, agreement statistics, Wilson intervals,
//! paired t-tests and judge-score aggregation.

mod agreement;
mod judge_table;
mod ranking;
mod stats;
mod triage_eval;

pub use agreement::{
    consensus_qwk, expert_leave_one_out, judge_agreement, map_judge_dimensions,
    pairwise_qwk_weighted, qwk, AgreementSummary, DimensionMap, PairwiseQwk, QwkResult,
    RatingRecord, WeightedQwk,
};
pub use judge_table::{aggregate_judge_scores, CriterionRow, JudgeScore, JudgeTable, Stars};
pub use ranking::{retrieval_metrics, RetrievalMetrics};
pub use stats::{
    inverse_normal_cdf, paired_ttest, reg_incomplete_beta, student_t_two_sided_p,
    wilson_interval, TTestDegeneracy, TTestResult,
};
pub use triage_eval::{severity_breakdown, triage_scores, SeverityRecall, TriageConfusion,
    TriageScores};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty DIRECT set")]
    EmptyDirectSet,
    #[error("sample size is zero")]
    ZeroSampleSize,
    #[error("successes {successes} exceed sample size {n}")]
    SuccessesExceedN { successes: u64, n: u64 },
    #[error("probability {0} outside (0, 1)")]
    BadProbability(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("too few samples: {n} (minimum {minimum})")]
    TooFewSamples { n: usize, minimum: usize },
    #[error("zero denominator for metric {0}")]
    ZeroDenominator(&'static str),
    #[error("rating {score} outside declared scale 1..={scale}")]
    ScaleViolation { score: usize, scale: usize },
    #[error("duplicate rating for (item {item}, rater {rater}, dimension {dimension})")]
    DuplicateRating {
        item: String,
        rater: String,
        dimension: String,
    },
    #[error("no rater pair with overlap >= {minimum}")]
    NoEligiblePair { minimum: usize },
    #[error("misaligned query ids across systems: {0}")]
    MisalignedQueries(String),
    #[error("unknown dimension {0} in dimension map")]
    UnknownDimension(String),
}
