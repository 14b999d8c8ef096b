//! Triage benchmark scoring: binary escalation confusion and per-severity
//! recall breakdown.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::triage::RouteLevel;

use super::EvalError;

/// Binary confusion counts with escalation as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageConfusion {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

/// Derived rates. A zero denominator leaves the affected metric `None`
/// rather than failing the whole report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageScores {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub fn_rate: Option<f64>,
    pub fp_rate: Option<f64>,
}

pub fn triage_scores(conf: &TriageConfusion) -> TriageScores {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    TriageScores {
        recall: ratio(conf.tp, conf.tp + conf.fn_),
        precision: ratio(conf.tp, conf.tp + conf.fp),
        fn_rate: ratio(conf.fn_, conf.tp + conf.fn_),
        fp_rate: ratio(conf.fp, conf.fp + conf.tn),
    }
}

/// Per-gold-class recall, treating any escalation (EMERGENCY_NOW or
/// SAME_DAY prediction) as positive for the two escalation classes and an
/// exact PASS prediction as correct for the PASS class. Classes with no gold
/// examples are absent from the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityRecall {
    pub per_class: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, u64>,
}

pub fn severity_breakdown(
    pairs: &[(RouteLevel, RouteLevel)], // (gold, predicted)
) -> Result<SeverityRecall, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::TooFewSamples { n: 0, minimum: 1 });
    }
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    let mut correct: BTreeMap<String, u64> = BTreeMap::new();
    for (gold, pred) in pairs {
        let key = gold.to_string();
        *totals.entry(key.clone()).or_insert(0) += 1;
        let escalated = matches!(pred, RouteLevel::EmergencyNow | RouteLevel::SameDay);
        let ok = match gold {
            RouteLevel::EmergencyNow | RouteLevel::SameDay => escalated,
            RouteLevel::Pass => !escalated,
        };
        if ok {
            *correct.entry(key).or_insert(0) += 1;
        }
    }
    let per_class = totals
        .iter()
        .map(|(k, &n)| {
            let c = correct.get(k).copied().unwrap_or(0);
            (k.clone(), c as f64 / n as f64)
        })
        .collect();
    Ok(SeverityRecall {
        per_class,
        counts: totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round1(x: f64) -> f64 {
        (x * 1000.0).round() / 10.0
    }

    #[test]
    fn published_confusion_counts_reproduce_rates() {
        let conf = TriageConfusion {
            tp: 78,
            fn_: 12,
            fp: 9,
            tn: 51,
        };
        let s = triage_scores(&conf);
        assert_eq!(round1(s.recall.unwrap()), 86.7);
        assert_eq!(round1(s.precision.unwrap()), 89.7);
        assert_eq!(round1(s.fn_rate.unwrap()), 13.3);
        assert_eq!(round1(s.fp_rate.unwrap()), 15.0);
    }

    #[test]
    fn perfect_classifier() {
        let conf = TriageConfusion {
            tp: 10,
            fn_: 0,
            fp: 0,
            tn: 5,
        };
        let s = triage_scores(&conf);
        assert_eq!(s.recall, Some(1.0));
        assert_eq!(s.precision, Some(1.0));
        assert_eq!(s.fn_rate, Some(0.0));
        assert_eq!(s.fp_rate, Some(0.0));
    }

    #[test]
    fn all_ones_symmetry() {
        let conf = TriageConfusion {
            tp: 1,
            fn_: 1,
            fp: 1,
            tn: 1,
        };
        let s = triage_scores(&conf);
        for v in [s.recall, s.precision, s.fn_rate, s.fp_rate] {
            assert_eq!(v, Some(0.5));
        }
    }

    #[test]
    fn zero_denominators_are_none() {
        let conf = TriageConfusion {
            tp: 0,
            fn_: 0,
            fp: 0,
            tn: 3,
        };
        let s = triage_scores(&conf);
        assert_eq!(s.recall, None);
        assert_eq!(s.precision, None);
        assert_eq!(s.fn_rate, None);
        assert_eq!(s.fp_rate, Some(0.0));
    }

    use RouteLevel::*;

    #[test]
    fn all_emergencies_escalated_is_recall_one() {
        let pairs = vec![(EmergencyNow, EmergencyNow), (EmergencyNow, SameDay)];
        let r = severity_breakdown(&pairs).unwrap();
        assert_eq!(r.per_class["EMERGENCY_NOW"], 1.0);
    }

    #[test]
    fn nine_of_ten_same_day() {
        let mut pairs = vec![(SameDay, SameDay); 9];
        pairs.push((SameDay, Pass));
        let r = severity_breakdown(&pairs).unwrap();
        assert!((r.per_class["SAME_DAY"] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn mixed_fixture_matches_hand_tally() {
        // Hand tally: EMERGENCY_NOW 2/2 escalated; SAME_DAY 1/2; PASS 1/2.
        let pairs = vec![
            (EmergencyNow, EmergencyNow),
            (EmergencyNow, SameDay),
            (SameDay, Pass),
            (SameDay, EmergencyNow),
            (Pass, Pass),
            (Pass, SameDay),
        ];
        let r = severity_breakdown(&pairs).unwrap();
        assert_eq!(r.per_class["EMERGENCY_NOW"], 1.0);
        assert_eq!(r.per_class["SAME_DAY"], 0.5);
        assert_eq!(r.per_class["PASS"], 0.5);
        assert_eq!(r.counts["PASS"], 2);
    }

    #[test]
    fn absent_class_is_absent() {
        let pairs = vec![(Pass, Pass)];
        let r = severity_breakdown(&pairs).unwrap();
        assert!(!r.per_class.contains_key("EMERGENCY_NOW"));
    }
}
