//! Judge-score aggregation across system variants: per-criterion means with
//! paired significance tests against the second-best system.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::stats::{paired_ttest, TTestResult};
use super::EvalError;

/// One judge score for (system, criterion, query).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub system: String,
    pub criterion: String,
    pub query_id: String,
    pub score: f64,
}

/// Significance stars at the usual thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stars {
    None,
    P05,
    P01,
    P001,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p < 0.001 {
            Stars::P001
        } else if p < 0.01 {
            Stars::P01
        } else if p < 0.05 {
            Stars::P05
        } else {
            Stars::None
        }
    }

    pub fn marker(&self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::P05 => "*",
            Stars::P01 => "**",
            Stars::P001 => "***",
        }
    }
}

/// Per-criterion row: system means, the best (lowest-mean; scores are
/// 1–3, lower is better) system, and the paired test of best vs second-best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub criterion: String,
    pub means: BTreeMap<String, f64>,
    pub best_system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_best_system: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_vs_second_best: Option<TTestResult>,
    pub stars: Stars,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeTable {
    pub rows: Vec<CriterionRow>,
    pub n_queries: usize,
}

/// Aggregate judge scores into a comparison table. Query sets must align
/// across systems per criterion (a criterion may be absent from a system
/// entirely, e.g. grounding for a no-retrieval variant). With a single
/// system only means are produced.
pub fn aggregate_judge_scores(scores: &[JudgeScore]) -> Result<JudgeTable, EvalError> {
    // criterion → system → query → score
    let mut grid: BTreeMap<&str, BTreeMap<&str, BTreeMap<&str, f64>>> = BTreeMap::new();
    for s in scores {
        grid.entry(&s.criterion)
            .or_default()
            .entry(&s.system)
            .or_default()
            .insert(&s.query_id, s.score);
    }
    let all_queries: BTreeSet<&str> = scores.iter().map(|s| s.query_id.as_str()).collect();

    let mut rows = Vec::new();
    for (criterion, systems) in &grid {
        // Alignment check within the criterion.
        let mut query_sets: Vec<(&str, BTreeSet<&str>)> = systems
            .iter()
            .map(|(sys, per_query)| (*sys, per_query.keys().copied().collect()))
            .collect();
        query_sets.sort_by_key(|(sys, _)| *sys);
        for w in query_sets.windows(2) {
            if w[0].1 != w[1].1 {
                return Err(EvalError::MisalignedQueries(format!(
                    "criterion {criterion}: systems {} and {} rate different query sets",
                    w[0].0, w[1].0
                )));
            }
        }

        let means: BTreeMap<String, f64> = systems
            .iter()
            .map(|(sys, per_query)| {
                let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
                (sys.to_string(), mean)
            })
            .collect();

        // Lower is better.
        let mut ordered: Vec<(&String, &f64)> = means.iter().collect();
        ordered.sort_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)));
        let best_system = ordered[0].0.clone();
        let second_best_system = ordered.get(1).map(|(s, _)| (*s).clone());

        let test_vs_second_best = match &second_best_system {
            Some(second) => {
                let best_scores = &systems[best_system.as_str()];
                let second_scores = &systems[second.as_str()];
                let queries: Vec<&&str> = best_scores.keys().collect();
                let a: Vec<f64> = queries.iter().map(|q| best_scores[**q]).collect();
                let b: Vec<f64> = queries.iter().map(|q| second_scores[**q]).collect();
                Some(paired_ttest(&a, &b)?)
            }
            None => None,
        };
        let stars = test_vs_second_best
            .as_ref()
            .map_or(Stars::None, |t| Stars::from_p(t.p_two_sided));

        rows.push(CriterionRow {
            criterion: criterion.to_string(),
            means,
            best_system,
            second_best_system,
            test_vs_second_best,
            stars,
        });
    }
    Ok(JudgeTable {
        rows,
        n_queries: all_queries.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(system: &str, criterion: &str, query: &str, value: f64) -> JudgeScore {
        JudgeScore {
            system: system.into(),
            criterion: criterion.into(),
            query_id: query.into(),
            score: value,
        }
    }

    #[test]
    fn single_system_means_only() {
        let scores = vec![
            score("A", "correctness", "q1", 1.0),
            score("A", "correctness", "q2", 2.0),
        ];
        let table = aggregate_judge_scores(&scores).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.means["A"], 1.5);
        assert!(row.test_vs_second_best.is_none());
        assert_eq!(row.stars, Stars::None);
    }

    #[test]
    fn identical_systems_have_p_one() {
        let mut scores = Vec::new();
        for q in 0..5 {
            scores.push(score("A", "c", &format!("q{q}"), 1.0 + q as f64 % 2.0));
            scores.push(score("B", "c", &format!("q{q}"), 1.0 + q as f64 % 2.0));
        }
        let table = aggregate_judge_scores(&scores).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.test_vs_second_best.as_ref().unwrap().p_two_sided, 1.0);
        assert_eq!(row.stars, Stars::None);
    }

    #[test]
    fn planted_separation_earns_stars_matching_direct_test() {
        let mut scores = Vec::new();
        let mut a_scores = Vec::new();
        let mut b_scores = Vec::new();
        for q in 0..30 {
            // B consistently a bit worse with slight variation.
            let a = 1.0 + (q % 3) as f64 * 0.1;
            let b = a + 0.5 + (q % 2) as f64 * 0.1;
            a_scores.push(a);
            b_scores.push(b);
            scores.push(score("A", "c", &format!("q{q:02}"), a));
            scores.push(score("B", "c", &format!("q{q:02}"), b));
        }
        let table = aggregate_judge_scores(&scores).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.best_system, "A");
        let direct = paired_ttest(&a_scores, &b_scores).unwrap();
        let got = row.test_vs_second_best.as_ref().unwrap();
        assert!((got.p_two_sided - direct.p_two_sided).abs() < 1e-12);
        assert_eq!(row.stars, Stars::from_p(direct.p_two_sided));
        assert_eq!(row.stars, Stars::P001);
    }

    #[test]
    fn misaligned_query_ids_rejected() {
        let scores = vec![
            score("A", "c", "q1", 1.0),
            score("A", "c", "q2", 1.0),
            score("B", "c", "q1", 1.0),
            score("B", "c", "q3", 1.0),
        ];
        assert!(matches!(
            aggregate_judge_scores(&scores),
            Err(EvalError::MisalignedQueries(_))
        ));
    }

    #[test]
    fn criterion_absent_from_one_system_is_fine() {
        // Grounding rated only for the retrieval system.
        let scores = vec![
            score("A", "grounding", "q1", 2.0),
            score("A", "grounding", "q2", 2.0),
            score("A", "correctness", "q1", 1.0),
            score("A", "correctness", "q2", 1.0),
            score("B", "correctness", "q1", 2.0),
            score("B", "correctness", "q2", 2.0),
        ];
        let table = aggregate_judge_scores(&scores).unwrap();
        assert_eq!(table.rows.len(), 2);
        let grounding = table.rows.iter().find(|r| r.criterion == "grounding").unwrap();
        assert_eq!(grounding.means.len(), 1);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(Stars::from_p(0.2), Stars::None);
        assert_eq!(Stars::from_p(0.04), Stars::P05);
        assert_eq!(Stars::from_p(0.009), Stars::P01);
        assert_eq!(Stars::from_p(0.0009), Stars::P001);
        assert_eq!(Stars::P01.marker(), "**");
    }
}
