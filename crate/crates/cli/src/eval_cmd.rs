//! Batch evaluation commands: retrieval metrics grid, triage confusion,
//! agreement statistics, and the judge comparison table. Each command writes
//! a JSON report and a text table and prints the table to stdout.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use serde_json::json;

use careroute_core::benchgen::Benchmark;
use careroute_core::config::{Engine, RunConfig};
use careroute_core::corpus::ChunkId;
use careroute_core::evalkit::{
    aggregate_judge_scores, consensus_qwk, expert_leave_one_out, judge_agreement,
    map_judge_dimensions, pairwise_qwk_weighted, retrieval_metrics, severity_breakdown,
    triage_scores, wilson_interval, DimensionMap, JudgeScore, RatingRecord, TriageConfusion,
};
use careroute_core::pipeline::build_envelope;
use careroute_core::retrieval::{bm25_retrieve, dense_retrieve, rerank, rrf_fuse};
use careroute_core::stage::PlatformMetadata;
use careroute_core::trace::PipelineTrace;
use careroute_core::triage::{pre_gen_triage, RouteLevel};

use crate::CliError;

#[derive(Debug, Args)]
pub struct EvalRetrievalArgs {
    /// Benchmark file produced by `benchgen`.
    #[arg(long)]
    pub bench: PathBuf,
    /// Report file prefix (writes <prefix>.json and <prefix>.txt).
    #[arg(long, default_value = "eval-retrieval")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalTriageArgs {
    /// Labeled queries, JSONL: {"query", "meta"?, "gold"}.
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long, default_value = "eval-triage")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalAgreementArgs {
    /// Ratings file (.jsonl or .csv) with item_id, rater_id, dimension, score.
    #[arg(long)]
    pub ratings: PathBuf,
    /// Rater id treated as the judge; all others are experts.
    #[arg(long, default_value = "judge")]
    pub judge_rater: String,
    /// Expert-dimension → judge-criteria mapping (JSON).
    #[arg(long)]
    pub dimension_map: Option<PathBuf>,
    /// Ordinal scale size.
    #[arg(long, default_value_t = 3)]
    pub scale: usize,
    /// Closeness threshold for the within fraction.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "eval-agreement")]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalJudgeTableArgs {
    /// Judge scores, JSONL: {"system", "criterion", "query_id", "score"}.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "eval-judge")]
    pub out_prefix: PathBuf,
}

fn write_reports(prefix: &Path, json_value: &serde_json::Value, text: &str) -> Result<(), CliError> {
    let json_path = prefix.with_extension("json");
    let text_path = prefix.with_extension("txt");
    std::fs::write(&json_path, serde_json::to_string_pretty(json_value).unwrap())?;
    std::fs::write(&text_path, text)?;
    print!("{text}");
    println!("reports: {} / {}", json_path.display(), text_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval retrieval
// ---------------------------------------------------------------------------

pub fn cmd_eval_retrieval(config: &RunConfig, args: &EvalRetrievalArgs) -> Result<(), CliError> {
    let engine = Engine::build(config)?;
    let bench: Benchmark = serde_json::from_str(
        &std::fs::read_to_string(&args.bench)
            .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", args.bench.display())))?,
    )
    .map_err(|e| CliError::Input(format!("benchmark parse error: {e}")))?;
    if bench.items.is_empty() {
        return Err(CliError::Input("benchmark has no items".into()));
    }

    let ks = [5usize, 10, 50];
    let variants = ["bm25", "dense", "hybrid_rrf", "hybrid_rrf_rerank"];
    let mut sums: BTreeMap<&str, (BTreeMap<usize, f64>, BTreeMap<usize, f64>, f64)> = variants
        .iter()
        .map(|v| (*v, (BTreeMap::new(), BTreeMap::new(), 0.0)))
        .collect();

    for item in &bench.items {
        let direct: BTreeSet<ChunkId> = item.direct_ids();
        if direct.is_empty() {
            continue;
        }
        let sparse = bm25_retrieve(&engine.indexes.sparse, &item.question, usize::MAX);
        let dense = dense_retrieve(
            &engine.indexes.dense,
            &item.question,
            engine.retrieval.k_dense.max(50),
            engine.embedder.as_ref(),
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
        let fused = rrf_fuse(&[dense.clone(), sparse.clone()], engine.retrieval.k_rrf)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let reranked = match engine.reranker.as_deref() {
            Some(scorer) if !fused.is_empty() => rerank(
                scorer,
                &item.question,
                &fused.truncated(50),
                50,
                &engine.store,
            )
            .unwrap_or_else(|_| fused.clone()),
            _ => fused.clone(),
        };
        for (name, list) in [
            ("bm25", &sparse),
            ("dense", &dense),
            ("hybrid_rrf", &fused),
            ("hybrid_rrf_rerank", &reranked),
        ] {
            let m = retrieval_metrics(list, &direct, &ks)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let entry = sums.get_mut(name).unwrap();
            for &k in &ks {
                *entry.0.entry(k).or_insert(0.0) += m.recall_at[&k];
                *entry.1.entry(k).or_insert(0.0) += m.hit_at[&k];
            }
            entry.2 += m.reciprocal_rank;
        }
    }

    let n = bench.items.len() as f64;
    let mut rows = Vec::new();
    let mut text = String::new();
    text.push_str(&format!(
        "Retrieval metrics over {} benchmark questions (DIRECT evidence)\n",
        bench.items.len()
    ));
    text.push_str(&format!(
        "{:<20} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
        "retriever", "R@5", "Hit@5", "R@10", "Hit@10", "R@50", "Hit@50", "MRR"
    ));
    for v in variants {
        let (recall, hit, rr) = &sums[v];
        let row = json!({
            "retriever": v,
            "recall_at": recall.iter().map(|(k, s)| (k.to_string(), s / n)).collect::<BTreeMap<_,_>>(),
            "hit_at": hit.iter().map(|(k, s)| (k.to_string(), s / n)).collect::<BTreeMap<_,_>>(),
            "mrr": rr / n,
        });
        text.push_str(&format!(
            "{:<20} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
            v,
            recall[&5] / n,
            hit[&5] / n,
            recall[&10] / n,
            hit[&10] / n,
            recall[&50] / n,
            hit[&50] / n,
            rr / n
        ));
        rows.push(row);
    }
    write_reports(
        &args.out_prefix,
        &json!({ "n_items": bench.items.len(), "rows": rows }),
        &text,
    )
}

// ---------------------------------------------------------------------------
// eval triage
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct LabeledQuery {
    query: String,
    #[serde(default)]
    meta: PlatformMetadata,
    gold: RouteLevel,
}

pub fn cmd_eval_triage(config: &RunConfig, args: &EvalTriageArgs) -> Result<(), CliError> {
    let engine = Engine::build(config)?;
    let contents = std::fs::read_to_string(&args.labeled)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", args.labeled.display())))?;
    let mut rows = Vec::new();
    for (idx, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: LabeledQuery = serde_json::from_str(line).map_err(|e| {
            CliError::Input(format!("{} line {}: {e}", args.labeled.display(), idx + 1))
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input("labeled file has no records".into()));
    }

    let mut conf = TriageConfusion {
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
    };
    let mut pairs = Vec::new();
    let mut misses = Vec::new();
    for row in &rows {
        let mut trace = PipelineTrace::default();
        let envelope = build_envelope(
            &row.query,
            row.meta,
            &engine.patterns,
            engine.translator.as_ref(),
            &mut trace,
        )?;
        let outcome = pre_gen_triage(
            &envelope.normalized,
            envelope.english.as_deref(),
            envelope.stage,
            &envelope.concerns,
            &engine.triage_context(),
        );
        let gold_escalates = row.gold != RouteLevel::Pass;
        let pred_escalates = outcome.level != RouteLevel::Pass;
        match (gold_escalates, pred_escalates) {
            (true, true) => conf.tp += 1,
            (true, false) => {
                conf.fn_ += 1;
                misses.push(format!("missed {}: \"{}\"", row.gold, row.query));
            }
            (false, true) => {
                conf.fp += 1;
                misses.push(format!("false alarm ({}): \"{}\"", outcome.level, row.query));
            }
            (false, false) => conf.tn += 1,
        }
        pairs.push((row.gold, outcome.level));
    }

    let scores = triage_scores(&conf);
    let severity = severity_breakdown(&pairs).map_err(|e| CliError::Input(e.to_string()))?;
    let pct = |x: Option<f64>| x.map(|v| format!("{:.1}%", v * 100.0)).unwrap_or("—".into());

    let mut text = String::new();
    text.push_str(&format!("Binary triage routing on {} labeled queries\n", rows.len()));
    text.push_str(&format!(
        "{:<26} {:>12} {:>14}\n",
        "", "Pred. Escalation", "Pred. Pass"
    ));
    text.push_str(&format!(
        "{:<26} {:>12} {:>14}\n",
        format!("GT Escalation (n={})", conf.tp + conf.fn_),
        conf.tp,
        conf.fn_
    ));
    text.push_str(&format!(
        "{:<26} {:>12} {:>14}\n",
        format!("GT Pass (n={})", conf.fp + conf.tn),
        conf.fp,
        conf.tn
    ));
    text.push_str(&format!("Emergency Recall        {}\n", pct(scores.recall)));
    text.push_str(&format!("Emergency Precision     {}\n", pct(scores.precision)));
    text.push_str(&format!("Missed Emergencies (FN) {}\n", pct(scores.fn_rate)));
    text.push_str(&format!("False Alarms (FP)       {}\n", pct(scores.fp_rate)));
    text.push_str("Per-severity recall:\n");
    for (class, recall) in &severity.per_class {
        text.push_str(&format!(
            "  {:<14} {:>6.1}%  (n={})\n",
            class,
            recall * 100.0,
            severity.counts[class]
        ));
    }
    // Wilson intervals on the binary rates mirror the reporting style used
    // for small-sample findings.
    if let (Some(_), n) = (scores.recall, conf.tp + conf.fn_) {
        let (lo, hi) = wilson_interval(conf.tp, n, 0.95)
            .map_err(|e| CliError::Input(e.to_string()))?;
        text.push_str(&format!(
            "Recall 95% Wilson interval: [{:.1}%, {:.1}%]\n",
            lo * 100.0,
            hi * 100.0
        ));
    }
    if !misses.is_empty() {
        text.push_str("Disagreements:\n");
        for m in &misses {
            text.push_str(&format!("  {m}\n"));
        }
    }
    write_reports(
        &args.out_prefix,
        &json!({
            "n": rows.len(),
            "confusion": { "tp": conf.tp, "fn": conf.fn_, "fp": conf.fp, "tn": conf.tn },
            "scores": scores,
            "severity": severity,
        }),
        &text,
    )
}

// ---------------------------------------------------------------------------
// eval agreement
// ---------------------------------------------------------------------------

fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>, CliError> {
    let contents = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", path.display())))?;
    let is_csv = path.extension().map(|e| e == "csv").unwrap_or(false);
    let mut records = Vec::new();
    if is_csv {
        let mut reader = csv::Reader::from_reader(contents.as_bytes());
        for (idx, row) in reader.deserialize::<RatingRecord>().enumerate() {
            records.push(row.map_err(|e| {
                CliError::Input(format!("{} record {}: {e}", path.display(), idx + 1))
            })?);
        }
    } else {
        for (idx, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|e| {
                CliError::Input(format!("{} line {}: {e}", path.display(), idx + 1))
            })?);
        }
    }
    Ok(records)
}

pub fn cmd_eval_agreement(args: &EvalAgreementArgs) -> Result<(), CliError> {
    let records = load_ratings(&args.ratings)?;
    let (judge_records, expert_records): (Vec<_>, Vec<_>) = records
        .into_iter()
        .partition(|r| r.rater_id == args.judge_rater);
    if expert_records.is_empty() {
        return Err(CliError::Input("no expert ratings found".into()));
    }

    // Map judge criteria onto expert dimensions when a mapping is supplied;
    // otherwise compare on shared dimension names directly.
    let mapped_judge = match &args.dimension_map {
        Some(path) => {
            let map = DimensionMap::from_json(&std::fs::read_to_string(path)?)
                .map_err(|e| CliError::Input(format!("dimension map: {e}")))?;
            map_judge_dimensions(&judge_records, &map)
                .map_err(|e| CliError::Input(e.to_string()))?
        }
        None => judge_records.clone(),
    };

    let dimensions: BTreeSet<String> =
        expert_records.iter().map(|r| r.dimension.clone()).collect();

    let mut text = String::new();
    let mut json_rows = Vec::new();
    text.push_str(&format!(
        "{:<24} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}\n",
        "dimension", "J-H MAE", "J-H ≤0.5", "H-H MAE", "H-H ≤0.5", "J-H QWK", "H-H QWK"
    ));
    for dim in &dimensions {
        let judge_by_item: BTreeMap<String, f64> = mapped_judge
            .iter()
            .filter(|r| &r.dimension == dim)
            .map(|r| (r.item_id.clone(), r.score))
            .collect();
        let jh = judge_agreement(&judge_by_item, &expert_records, dim, args.threshold)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let hh = expert_leave_one_out(&expert_records, dim, args.threshold)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let jh_qwk = consensus_qwk(&judge_by_item, &expert_records, dim, args.scale)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let hh_qwk = pairwise_qwk_weighted(&expert_records, dim, args.scale)
            .map_err(|e| CliError::Input(e.to_string()))?;
        text.push_str(&format!(
            "{:<24} {:>9.2} {:>8.0}% {:>9.2} {:>8.0}% {:>8.3} {:>8.3}\n",
            dim,
            jh.mae,
            jh.frac_within * 100.0,
            hh.mae,
            hh.frac_within * 100.0,
            jh_qwk.kappa,
            hh_qwk.aggregate
        ));
        let pair_range = hh_qwk
            .per_pair
            .iter()
            .map(|p| p.kappa)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                (lo.min(k), hi.max(k))
            });
        text.push_str(&format!(
            "{:<24} pairwise overlaps: {:?}, range [{:.2}, {:.2}]\n",
            "",
            hh_qwk.per_pair.iter().map(|p| p.overlap).collect::<Vec<_>>(),
            pair_range.0,
            pair_range.1
        ));
        json_rows.push(json!({
            "dimension": dim,
            "judge_vs_experts": { "mae": jh.mae, "frac_within": jh.frac_within, "qwk": jh_qwk },
            "experts_leave_one_out": { "mae": hh.mae, "frac_within": hh.frac_within },
            "experts_pairwise_qwk": hh_qwk,
        }));
    }
    write_reports(&args.out_prefix, &json!({ "dimensions": json_rows }), &text)
}

// ---------------------------------------------------------------------------
// eval judge-table
// ---------------------------------------------------------------------------

pub fn cmd_eval_judge_table(args: &EvalJudgeTableArgs) -> Result<(), CliError> {
    let contents = std::fs::read_to_string(&args.scores)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", args.scores.display())))?;
    let mut scores: Vec<JudgeScore> = Vec::new();
    for (idx, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        scores.push(serde_json::from_str(line).map_err(|e| {
            CliError::Input(format!("{} line {}: {e}", args.scores.display(), idx + 1))
        })?);
    }
    let table = aggregate_judge_scores(&scores).map_err(|e| CliError::Input(e.to_string()))?;

    let systems: BTreeSet<String> = scores.iter().map(|s| s.system.clone()).collect();
    let mut text = String::new();
    text.push_str(&format!(
        "Judge-scored comparison over {} queries (lower is better)\n",
        table.n_queries
    ));
    text.push_str(&format!("{:<22}", "criterion"));
    for system in &systems {
        text.push_str(&format!(" {system:>18}"));
    }
    text.push('\n');
    for row in &table.rows {
        text.push_str(&format!("{:<22}", row.criterion));
        for system in &systems {
            match row.means.get(system) {
                Some(mean) => {
                    let marker = if system == &row.best_system {
                        row.stars.marker()
                    } else {
                        ""
                    };
                    text.push_str(&format!(" {:>18}", format!("{mean:.3}{marker}")));
                }
                None => text.push_str(&format!(" {:>18}", "—")),
            }
        }
        text.push('\n');
    }
    text.push_str("significance vs second-best (paired t-test): * p<0.05, ** p<0.01, *** p<0.001\n");
    write_reports(
        &args.out_prefix,
        &serde_json::to_value(&table).map_err(|e| CliError::Input(e.to_string()))?,
        &text,
    )
}
