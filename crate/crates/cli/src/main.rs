//! `veriseq` — dataset builder, verifier, evaluator, analyses, and scoring
//! service for the unique-optimum scheduling/LIS tasks.
//!
//! Option precedence everywhere: CLI flags, then the optional TOML config
//! file, then the `VERISEQ_SEED` / `VERISEQ_OUT_DIR` environment variables,
//! then built-in defaults.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use veriseq::domain::{RewardKind, RewardSpec, Task};
use veriseq::metrics::Estimator;

use veriseq_cli::dataset::{build_dataset, verify_dataset, DatasetSpec};
use veriseq_cli::evaluate::evaluate_run;
use veriseq_cli::features::run_features;
use veriseq_cli::responses::load_dataset;
use veriseq_cli::serve::{serve_stdio, serve_tcp};

#[derive(Parser)]
#[command(
    name = "veriseq",
    version,
    about = "Unique-optimum scheduling/LIS task pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a seeded dataset (train/test JSONL plus manifest).
    Generate(GenerateArgs),
    /// Re-check every certificate stored in a dataset file.
    Verify(VerifyArgs),
    /// Evaluate a response file: Pass@k / self-consistency curves and, for
    /// activity datasets, the sorting analysis.
    Evaluate(EvaluateArgs),
    /// Sorting analysis only (activity datasets).
    AnalyzeSort(AnalyzeSortArgs),
    /// Export the input-only LIS feature table with grouped split labels.
    Features(FeaturesArgs),
    /// Line-delimited JSON scoring service over stdio or TCP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Which task to build.
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Optional TOML config file (CLI flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    total: Option<usize>,
    #[arg(long)]
    hinted_fraction: Option<f64>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Comma-separated row counts routed to the test file.
    #[arg(long, value_delimiter = ',')]
    test_lengths: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Row-count cap for the exhaustive cross-check.
    #[arg(long, default_value_t = 12)]
    brute_max: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    /// Defaults to the smallest per-instance sample count.
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Unbiased)]
    estimator: EstimatorArg,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeSortArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Serve over stdio (the default transport).
    #[arg(long, conflicts_with = "tcp")]
    stdio: bool,
    /// Serve over TCP on this address, e.g. 127.0.0.1:7878.
    #[arg(long)]
    tcp: Option<String>,
    /// Default reward combination, e.g. "ans=1.0" or
    /// "ans=0.34,ids_exact=0.33,sort=0.33"; requests may override it.
    #[arg(long, default_value = "ans=1.0")]
    rewards: String,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Activity,
    Lis,
}

impl From<TaskArg> for Task {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::Activity => Task::Activity,
            TaskArg::Lis => Task::Lis,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Prefix,
    Unbiased,
}

impl From<EstimatorArg> for Estimator {
    fn from(value: EstimatorArg) -> Self {
        match value {
            EstimatorArg::Prefix => Estimator::Prefix,
            EstimatorArg::Unbiased => Estimator::Unbiased,
        }
    }
}

/// Optional TOML config: any subset of the generate options plus generator
/// bounds.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    total: Option<usize>,
    hinted_fraction: Option<f64>,
    min_len: Option<usize>,
    max_len: Option<usize>,
    test_lengths: Option<Vec<usize>>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    s_max: Option<u32>,
    d_min: Option<u32>,
    d_max: Option<u32>,
    v_min: Option<i64>,
    v_max: Option<i64>,
    max_tries: Option<u32>,
}

fn env_seed() -> Option<u64> {
    std::env::var("VERISEQ_SEED").ok()?.parse().ok()
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var("VERISEQ_OUT_DIR").ok().map(PathBuf::from)
}

fn resolve_out_dir(cli: Option<PathBuf>) -> PathBuf {
    cli.or_else(env_out_dir)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let seed = args.seed.or(file.seed).or_else(env_seed).unwrap_or(0);
    let mut spec = DatasetSpec::new(args.task.into(), seed);
    spec.total_instances = args.total.or(file.total).unwrap_or(spec.total_instances);
    spec.hinted_fraction = args
        .hinted_fraction
        .or(file.hinted_fraction)
        .unwrap_or(spec.hinted_fraction);
    spec.m_min = args.min_len.or(file.min_len).unwrap_or(spec.m_min);
    spec.m_max = args.max_len.or(file.max_len).unwrap_or(spec.m_max);
    if let Some(lengths) = args.test_lengths.or(file.test_lengths) {
        spec.test_length_set = lengths.into_iter().collect::<BTreeSet<usize>>();
    } else {
        // Default held-out lengths clamp to the sampled range.
        spec.test_length_set = spec
            .test_length_set
            .iter()
            .copied()
            .filter(|&l| l >= spec.m_min && l <= spec.m_max)
            .collect();
        if spec.test_length_set.is_empty() {
            spec.test_length_set.insert(spec.m_max);
        }
    }
    spec.generator.s_max = file.s_max.unwrap_or(spec.generator.s_max);
    spec.generator.d_min = file.d_min.unwrap_or(spec.generator.d_min);
    spec.generator.d_max = file.d_max.unwrap_or(spec.generator.d_max);
    spec.generator.v_min = file.v_min.unwrap_or(spec.generator.v_min);
    spec.generator.v_max = file.v_max.unwrap_or(spec.generator.v_max);
    spec.generator.max_tries = file.max_tries.unwrap_or(spec.generator.max_tries);

    let out_dir = resolve_out_dir(args.out_dir.or(file.out_dir));
    let output = build_dataset(&spec, &out_dir)?;
    println!(
        "wrote {} train + {} test records ({} hinted) under {}",
        output.counts.train,
        output.counts.test,
        output.counts.hinted,
        out_dir.display()
    );
    println!("manifest: {}", output.manifest_path.display());
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<bool> {
    let records = load_dataset(&args.dataset)?;
    let report = verify_dataset(&records, args.brute_max);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.ok())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let out_dir = resolve_out_dir(args.out_dir);
    let outputs = evaluate_run(
        &args.dataset,
        &args.responses,
        args.k_max,
        args.estimator.into(),
        &out_dir,
    )?;
    println!("{}", serde_json::to_string_pretty(&outputs.summary)?);
    println!("metrics: {}", outputs.metrics_csv.display());
    if let Some(path) = &outputs.sort_csv {
        println!("sort analysis: {}", path.display());
    }
    Ok(())
}

fn run_analyze_sort(args: AnalyzeSortArgs) -> Result<()> {
    use veriseq_cli::evaluate::write_sort_analysis;
    use veriseq_cli::responses::{join_responses, load_responses};

    let records = load_dataset(&args.dataset)?;
    if records.iter().any(|r| r.task != Task::Activity) {
        bail!("sorting analysis requires an activity dataset");
    }
    let grouped = join_responses(&records, load_responses(&args.responses)?)?;
    let mut instances = Vec::new();
    for (id, texts) in grouped {
        let record = records.iter().find(|r| r.seed == id).expect("joined");
        instances.push((id, record.instance()?, texts));
    }
    let out_dir = resolve_out_dir(args.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let (path, summary) = write_sort_analysis(&instances, &out_dir)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("rows: {}", path.display());
    Ok(())
}

fn run_features_cmd(args: FeaturesArgs) -> Result<()> {
    let split_seed = args.split_seed.or_else(env_seed).unwrap_or(0);
    let summary = run_features(
        &args.dataset,
        &args.responses,
        args.test_fraction,
        split_seed,
        &args.out,
    )?;
    println!(
        "{} responses, {} with answers, {} rows written ({} train / {} test instances) -> {}",
        summary.responses,
        summary.with_answer,
        summary.rows_written,
        summary.train_instances,
        summary.test_instances,
        args.out.display()
    );
    Ok(())
}

fn parse_reward_spec(rewards: &str, lambda: f64, gamma: f64) -> Result<RewardSpec> {
    let mut components = Vec::new();
    for part in rewards.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (kind, weight) = part
            .split_once('=')
            .with_context(|| format!("component `{part}` is not kind=weight"))?;
        let kind = match kind.trim() {
            "ans" => RewardKind::Ans,
            "ans_fmt" => RewardKind::AnsFmt,
            "ids_exact" => RewardKind::IdsExact,
            "ids_prefix" => RewardKind::IdsPrefix,
            "sort" => RewardKind::Sort,
            other => bail!("unknown reward kind `{other}`"),
        };
        let weight: f64 = weight
            .trim()
            .parse()
            .with_context(|| format!("weight in `{part}`"))?;
        components.push((kind, weight));
    }
    let spec = RewardSpec::new(components)
        .with_lambda(lambda)
        .with_gamma(gamma);
    spec.validate()?;
    Ok(spec)
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let spec = parse_reward_spec(&args.rewards, args.lambda, args.gamma)?;
    match &args.tcp {
        Some(addr) => serve_tcp(addr, &spec),
        None => serve_stdio(&spec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args).map(|()| true),
        Command::Verify(args) => run_verify(args),
        Command::Evaluate(args) => run_evaluate(args).map(|()| true),
        Command::AnalyzeSort(args) => run_analyze_sort(args).map(|()| true),
        Command::Features(args) => run_features_cmd(args).map(|()| true),
        Command::Serve(args) => run_serve(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
