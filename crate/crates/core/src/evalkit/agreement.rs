//! Inter-rater agreement: quadratic-weighted Cohen's kappa, overlap-weighted
//! pairwise aggregation, and distance-based judge↔expert closeness (MAE,
//! fraction within a threshold of the expert mean).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalError;

/// One rating: (item, rater, dimension) is unique; the score is ordinal on a
/// declared 1..=k scale, but derived records (mapped judge criteria) may be
/// fractional, so it is carried as f64 and rounded where category agreement
/// is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item_id: String,
    pub rater_id: String,
    pub dimension: String,
    pub score: f64,
}

/// Kappa plus a degeneracy flag: perfect agreement with zero marginal
/// variance is reported as 1.0 with the flag set instead of undefined, so
/// batch reports stay total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QwkResult {
    pub kappa: f64,
    pub degenerate: bool,
}

/// Quadratic-weighted Cohen's kappa over paired ordinal ratings in
/// `1..=scale`: weights `w_ij = (i-j)² / (scale-1)²`,
/// `κ = 1 − Σw·O / Σw·E` with expected proportions from marginal products.
pub fn qwk(ratings_a: &[usize], ratings_b: &[usize], scale: usize) -> Result<QwkResult, EvalError> {
    if ratings_a.len() != ratings_b.len() {
        return Err(EvalError::LengthMismatch {
            left: ratings_a.len(),
            right: ratings_b.len(),
        });
    }
    if ratings_a.len() < 2 {
        return Err(EvalError::TooFewSamples {
            n: ratings_a.len(),
            minimum: 2,
        });
    }
    if scale < 2 {
        return Err(EvalError::ScaleViolation { score: 0, scale });
    }
    for &s in ratings_a.iter().chain(ratings_b.iter()) {
        if s < 1 || s > scale {
            return Err(EvalError::ScaleViolation { score: s, scale });
        }
    }

    let n = ratings_a.len() as f64;
    let mut observed = vec![vec![0.0_f64; scale]; scale];
    for (&a, &b) in ratings_a.iter().zip(ratings_b.iter()) {
        observed[a - 1][b - 1] += 1.0 / n;
    }
    let mut marg_a = vec![0.0_f64; scale];
    let mut marg_b = vec![0.0_f64; scale];
    for i in 0..scale {
        for j in 0..scale {
            marg_a[i] += observed[i][j];
            marg_b[j] += observed[i][j];
        }
    }
    let denom_w = ((scale - 1) * (scale - 1)) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scale {
        for j in 0..scale {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_w;
            num += w * observed[i][j];
            den += w * marg_a[i] * marg_b[j];
        }
    }
    if den == 0.0 {
        // Both raters used a single identical category throughout.
        return Ok(QwkResult {
            kappa: 1.0,
            degenerate: true,
        });
    }
    Ok(QwkResult {
        kappa: 1.0 - num / den,
        degenerate: false,
    })
}

/// One rater pair's kappa on its overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseQwk {
    pub rater_a: String,
    pub rater_b: String,
    pub overlap: usize,
    pub kappa: f64,
    pub degenerate: bool,
}

/// Overlap-weighted aggregate of pairwise kappas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedQwk {
    pub aggregate: f64,
    pub per_pair: Vec<PairwiseQwk>,
}

/// Half-up rounding to the nearest category, clamped to `1..=scale`.
fn to_category(score: f64, scale: usize) -> usize {
    let rounded = (score + 0.5).floor() as i64;
    rounded.clamp(1, scale as i64) as usize
}

fn weighted_aggregate(pairs: &[(usize, f64)]) -> f64 {
    let total: usize = pairs.iter().map(|(n, _)| n).sum();
    pairs
        .iter()
        .map(|(n, k)| *n as f64 * k)
        .sum::<f64>()
        / total as f64
}

/// Group ratings for one dimension as rater → item → score, rejecting
/// duplicate (item, rater, dimension) triples.
fn by_rater(
    records: &[RatingRecord],
    dimension: &str,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, EvalError> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.dimension == dimension) {
        let per_item = out.entry(r.rater_id.clone()).or_default();
        if per_item.insert(r.item_id.clone(), r.score).is_some() {
            return Err(EvalError::DuplicateRating {
                item: r.item_id.clone(),
                rater: r.rater_id.clone(),
                dimension: dimension.to_string(),
            });
        }
    }
    Ok(out)
}

/// Pairwise QWK on the overlap between each rater pair, aggregated with
/// overlap sizes as weights. Pairs with overlap below 2 are skipped; if no
/// pair qualifies, this errors (complete-labeling kappas are not applicable
/// to partially rated data, which is the reason this function exists).
pub fn pairwise_qwk_weighted(
    records: &[RatingRecord],
    dimension: &str,
    scale: usize,
) -> Result<WeightedQwk, EvalError> {
    let by_rater = by_rater(records, dimension)?;
    let raters: Vec<&String> = by_rater.keys().collect();
    let mut per_pair = Vec::new();
    let mut weights = Vec::new();
    for i in 0..raters.len() {
        for j in (i + 1)..raters.len() {
            let a = &by_rater[raters[i]];
            let b = &by_rater[raters[j]];
            let overlap: Vec<&String> = a.keys().filter(|item| b.contains_key(*item)).collect();
            if overlap.len() < 2 {
                continue;
            }
            let va: Vec<usize> = overlap.iter().map(|it| to_category(a[*it], scale)).collect();
            let vb: Vec<usize> = overlap.iter().map(|it| to_category(b[*it], scale)).collect();
            let k = qwk(&va, &vb, scale)?;
            weights.push((overlap.len(), k.kappa));
            per_pair.push(PairwiseQwk {
                rater_a: raters[i].clone(),
                rater_b: raters[j].clone(),
                overlap: overlap.len(),
                kappa: k.kappa,
                degenerate: k.degenerate,
            });
        }
    }
    if per_pair.is_empty() {
        return Err(EvalError::NoEligiblePair { minimum: 2 });
    }
    Ok(WeightedQwk {
        aggregate: weighted_aggregate(&weights),
        per_pair,
    })
}

/// Distance-based closeness summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub n: usize,
    pub mae: f64,
    pub frac_within: f64,
}

fn summarize(diffs: &[f64], threshold: f64) -> Result<AgreementSummary, EvalError> {
    if diffs.is_empty() {
        return Err(EvalError::TooFewSamples { n: 0, minimum: 1 });
    }
    let n = diffs.len();
    let mae = diffs.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let within = diffs.iter().filter(|d| d.abs() <= threshold).count();
    Ok(AgreementSummary {
        n,
        mae,
        frac_within: within as f64 / n as f64,
    })
}

/// Judge vs expert consensus: per item, the consensus is the unrounded mean
/// of expert scores; MAE and the fraction of items with |judge − consensus|
/// ≤ threshold (boundary inclusive).
pub fn judge_agreement(
    judge: &BTreeMap<String, f64>,
    experts: &[RatingRecord],
    dimension: &str,
    threshold: f64,
) -> Result<AgreementSummary, EvalError> {
    let by_rater = by_rater(experts, dimension)?;
    let mut diffs = Vec::new();
    for (item, judge_score) in judge {
        let scores: Vec<f64> = by_rater
            .values()
            .filter_map(|per_item| per_item.get(item))
            .copied()
            .collect();
        if scores.is_empty() {
            continue;
        }
        let consensus = scores.iter().sum::<f64>() / scores.len() as f64;
        diffs.push(judge_score - consensus);
    }
    summarize(&diffs, threshold)
}

/// Leave-one-out expert agreement: each expert's score vs the mean of the
/// other experts on the same item, pooled over all (item, expert) pairs on
/// items with at least two raters. When only two experts rated an item the
/// "others" mean is a single rating; such items are included.
pub fn expert_leave_one_out(
    experts: &[RatingRecord],
    dimension: &str,
    threshold: f64,
) -> Result<AgreementSummary, EvalError> {
    let by_rater = by_rater(experts, dimension)?;
    let mut items: BTreeSet<&String> = BTreeSet::new();
    for per_item in by_rater.values() {
        items.extend(per_item.keys());
    }
    let mut diffs = Vec::new();
    for item in items {
        let rated: Vec<f64> = by_rater
            .values()
            .filter_map(|per_item| per_item.get(item))
            .copied()
            .collect();
        if rated.len() < 2 {
            continue;
        }
        let total: f64 = rated.iter().sum();
        for &score in &rated {
            let others_mean = (total - score) / (rated.len() as f64 - 1.0);
            diffs.push(score - others_mean);
        }
    }
    summarize(&diffs, threshold)
}

/// Judge vs expert-consensus kappa: per item, the expert consensus (mean of
/// expert scores) and the judge score are rounded half-up to the nearest
/// category, then compared with quadratic weights.
pub fn consensus_qwk(
    judge: &BTreeMap<String, f64>,
    experts: &[RatingRecord],
    dimension: &str,
    scale: usize,
) -> Result<QwkResult, EvalError> {
    let by_rater = by_rater(experts, dimension)?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (item, judge_score) in judge {
        let scores: Vec<f64> = by_rater
            .values()
            .filter_map(|per_item| per_item.get(item))
            .copied()
            .collect();
        if scores.is_empty() {
            continue;
        }
        let consensus = scores.iter().sum::<f64>() / scores.len() as f64;
        a.push(to_category(*judge_score, scale));
        b.push(to_category(consensus, scale));
    }
    qwk(&a, &b, scale)
}

/// Expert dimension → judge criteria mapping; grouped judge scores are the
/// unweighted mean of the mapped criteria. Ships as a config file so the
/// rubric alignment is data, not code.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DimensionMap {
    pub map: BTreeMap<String, Vec<String>>,
}

impl DimensionMap {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// Derive per-expert-dimension judge records by averaging the mapped judge
/// criteria per item. Items missing every mapped criterion are skipped.
pub fn map_judge_dimensions(
    judge_records: &[RatingRecord],
    map: &DimensionMap,
) -> Result<Vec<RatingRecord>, EvalError> {
    let mut out = Vec::new();
    // item → criterion → score (judge is a single logical rater).
    let mut per_item: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    let mut rater_id = None;
    for r in judge_records {
        rater_id.get_or_insert_with(|| r.rater_id.clone());
        per_item
            .entry(&r.item_id)
            .or_default()
            .insert(&r.dimension, r.score);
    }
    let rater_id = rater_id.unwrap_or_else(|| "judge".to_string());
    for (expert_dim, criteria) in &map.map {
        if criteria.is_empty() {
            return Err(EvalError::UnknownDimension(expert_dim.clone()));
        }
        for (item, scores) in &per_item {
            let mapped: Vec<f64> = criteria
                .iter()
                .filter_map(|c| scores.get(c.as_str()))
                .copied()
                .collect();
            if mapped.is_empty() {
                continue;
            }
            out.push(RatingRecord {
                item_id: (*item).to_string(),
                rater_id: rater_id.clone(),
                dimension: expert_dim.clone(),
                score: mapped.iter().sum::<f64>() / mapped.len() as f64,
            });
        }
    }
    Ok(out)
}
