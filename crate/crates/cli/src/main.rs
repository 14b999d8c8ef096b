//! Operator CLI: index building, single-query runs, triage dry runs,
//! benchmark generation and batch evaluation.
//!
//! Exit codes: 0 success, 2 input error, 3 missing artifact, 4 provider
//! failure.

mod commands;
mod eval_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "careroute",
    about = "Safety-first routing and hybrid retrieval engine for maternal-health queries",
    version
)]
pub struct Cli {
    /// Run configuration file (JSON). Relative pack paths resolve against
    /// its directory.
    #[arg(long, global = true, default_value = "fixtures/config.json")]
    pub config: PathBuf,

    /// Directory holding index snapshots (written by `index`, read by `ask`).
    /// Defaults to `artifacts/` next to the config file.
    #[arg(long, global = true)]
    pub index_dir: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

/// Config-file fields exposed as flags; a flag overrides the file value.
/// Defaults shown here are the deployed run configuration.
#[derive(Debug, Args)]
pub struct Overrides {
    /// Dense retrieval depth
    #[arg(long, global = true, default_value_t = 15)]
    pub k_dense: usize,
    /// Reciprocal-rank-fusion constant
    #[arg(long, global = true, default_value_t = 60)]
    pub k_rrf: usize,
    /// Rerank depth
    #[arg(long, global = true, default_value_t = 7)]
    pub k_rerank: usize,
    /// Evidence chunks handed to the generator
    #[arg(long, global = true, default_value_t = 7)]
    pub k_context: usize,
    /// BM25 k1
    #[arg(long, global = true, default_value_t = 1.2)]
    pub bm25_k1: f64,
    /// BM25 b
    #[arg(long, global = true, default_value_t = 0.75)]
    pub bm25_b: f64,
    /// Semantic emergency threshold
    #[arg(long, global = true, default_value_t = 0.50)]
    pub tau_now: f64,
    /// Semantic same-day threshold
    #[arg(long, global = true, default_value_t = 0.30)]
    pub tau_sd: f64,
    /// Generator temperature
    #[arg(long, global = true, default_value_t = 0.1)]
    pub temperature: f64,
    /// Generator retry budget
    #[arg(long, global = true, default_value_t = 3)]
    pub max_retries: u32,
    /// Generator timeout in seconds
    #[arg(long, global = true, default_value_t = 60)]
    pub timeout_s: u64,
    /// Random seed for seeded commands
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
}

impl Overrides {
    /// Apply only flags the user actually passed (detected against clap's
    /// defaults via the raw argv — clap keeps no "was set" bit for flattened
    /// args, so compare with the declared defaults).
    fn apply(&self, config: &mut careroute_core::config::RunConfig, argv: &[String]) {
        let passed = |flag: &str| argv.iter().any(|a| a == flag || a.starts_with(&format!("{flag}=")));
        if passed("--k-dense") {
            config.retrieval.k_dense = self.k_dense;
        }
        if passed("--k-rrf") {
            config.retrieval.k_rrf = self.k_rrf;
        }
        if passed("--k-rerank") {
            config.retrieval.k_rerank = self.k_rerank;
        }
        if passed("--k-context") {
            config.retrieval.k_context = self.k_context;
        }
        if passed("--bm25-k1") {
            config.retrieval.bm25_k1 = self.bm25_k1;
        }
        if passed("--bm25-b") {
            config.retrieval.bm25_b = self.bm25_b;
        }
        if passed("--tau-now") {
            config.tau_now = self.tau_now;
        }
        if passed("--tau-sd") {
            config.tau_sd = self.tau_sd;
        }
        if passed("--temperature") {
            config.generation.temperature = self.temperature;
        }
        if passed("--max-retries") {
            config.generation.max_retries = self.max_retries;
        }
        if passed("--timeout-s") {
            config.generation.timeout_s = self.timeout_s;
        }
        if passed("--seed") {
            config.seed = self.seed;
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist the sparse and dense index snapshots.
    Index,
    /// Run one query end to end and print the response as JSON.
    Ask(AskArgs),
    /// Triage-only dry run: print the routing decision without retrieval.
    Triage(QueryArgs),
    /// Build a synthetic multi-evidence retrieval benchmark.
    Benchgen(BenchgenArgs),
    /// Batch evaluation reports.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// The user query.
    #[arg(long)]
    pub query: String,
    /// Platform metadata: gestational week (1–45).
    #[arg(long)]
    pub gestational_week: Option<u8>,
    /// Platform metadata: weeks since delivery.
    #[arg(long)]
    pub postpartum_weeks: Option<u32>,
    /// Platform metadata: newborn age in days.
    #[arg(long)]
    pub newborn_age_days: Option<u32>,
    /// Force the life stage, bypassing inference
    /// (maternal_pregnant | postpartum | newborn).
    #[arg(long)]
    pub stage_override: Option<String>,
}

#[derive(Debug, Args)]
pub struct AskArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Include the full provenance trace in the output.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct BenchgenArgs {
    /// Number of benchmark items to build.
    #[arg(long, default_value_t = 10)]
    pub n_items: usize,
    /// Output file.
    #[arg(long, default_value = "benchmark.json")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Ranking metrics (Recall@K, Hit@K, MRR) per retriever variant over a
    /// generated benchmark.
    Retrieval(eval_cmd::EvalRetrievalArgs),
    /// Triage routing confusion and rates over a labeled query file.
    Triage(eval_cmd::EvalTriageArgs),
    /// Agreement statistics (QWK, MAE, within-threshold) over a ratings file.
    Agreement(eval_cmd::EvalAgreementArgs),
    /// Per-criterion system comparison with paired significance tests.
    JudgeTable(eval_cmd::EvalJudgeTableArgs),
}

/// CLI failure carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    MissingArtifact(String),
    Provider(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::MissingArtifact(_) => 3,
            CliError::Provider(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::MissingArtifact(m) | CliError::Provider(m) => m,
        }
    }
}

impl From<careroute_core::config::ConfigError> for CliError {
    fn from(e: careroute_core::config::ConfigError) -> Self {
        use careroute_core::config::ConfigError;
        match e {
            ConfigError::MissingSnapshot(p) => {
                CliError::MissingArtifact(format!("missing index snapshot: {}", p.display()))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<careroute_core::pipeline::PipelineError> for CliError {
    fn from(e: careroute_core::pipeline::PipelineError) -> Self {
        use careroute_core::pipeline::PipelineError;
        match e {
            PipelineError::GenerationFailed { .. } => CliError::Provider(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let result = run(cli, &argv);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    // Ratings- and scores-based reports run on their input files alone.
    match &cli.command {
        Command::Eval(EvalCommand::Agreement(args)) => {
            return eval_cmd::cmd_eval_agreement(args);
        }
        Command::Eval(EvalCommand::JudgeTable(args)) => {
            return eval_cmd::cmd_eval_judge_table(args);
        }
        _ => {}
    }
    let mut config = careroute_core::config::RunConfig::load(&cli.config)?;
    cli.overrides.apply(&mut config, argv);
    let index_dir = cli.index_dir.clone().unwrap_or_else(|| {
        cli.config
            .parent()
            .unwrap_or_else(|| std::path::Path::new("."))
            .join("artifacts")
    });
    match &cli.command {
        Command::Index => commands::cmd_index(&config, &index_dir),
        Command::Ask(args) => commands::cmd_ask(&config, &index_dir, args),
        Command::Triage(args) => commands::cmd_triage(&config, args),
        Command::Benchgen(args) => commands::cmd_benchgen(&config, args),
        Command::Eval(eval) => match eval {
            EvalCommand::Retrieval(args) => eval_cmd::cmd_eval_retrieval(&config, args),
            EvalCommand::Triage(args) => eval_cmd::cmd_eval_triage(&config, args),
            EvalCommand::Agreement(_) | EvalCommand::JudgeTable(_) => unreachable!(),
        },
    }
}
