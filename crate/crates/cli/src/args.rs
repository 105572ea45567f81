use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use streamal::drift::DetectorKind;
use streamal::generators::PRESETS;
use streamal::oracle::DelayKind;
use streamal::query::StrategyKind;
use streamal::{EstimatorKind, ExperimentConfig, StreamSpec};

#[derive(Debug, Parser)]
#[command(name = "streamal", version, about = "Stream-based active learning under verification latency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment grid and write CSV results.
    Run(RunArgs),
    /// Compare runs with Mann-Whitney and Friedman/Nemenyi tests.
    Stats(StatsArgs),
    /// Write a synthetic stream to CSV.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named config preset: default or paper-defaults.
    #[arg(long)]
    pub preset: Option<String>,
    /// Stream presets or CSV paths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub stream: Vec<String>,
    /// Label column for CSV streams.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, value_delimiter = ',')]
    pub budget: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub delay: Vec<u64>,
    #[arg(long, value_name = "uniform|truncnorm")]
    pub delay_dist: Option<String>,
    /// random, split or pal.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// pr or ignore_pending.
    #[arg(long, value_delimiter = ',')]
    pub estimator: Vec<String>,
    /// none, ddm, adwin or hdddm.
    #[arg(long, value_delimiter = ',')]
    pub detector: Vec<String>,
    /// Enable (or with `=false` disable) the drift-driven budget.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub dynamic_budget: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub m_high: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub m_low: Vec<f64>,
    #[arg(long)]
    pub delta_t: Option<f64>,
    /// Seed list such as `0..20` or `1,5,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    /// Skip the per-step trace file.
    #[arg(long)]
    pub no_steps: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// runs.csv files, or directories containing one.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Factor to compare: stream, budget, delay, strategy, estimator, detector or schedule.
    #[arg(long, default_value = "estimator")]
    pub by: String,
    /// accuracy, query_rate or h_score.
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "rbf_2_2")]
    pub stream: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of samples; the preset length when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// Generate without the induced drift.
    #[arg(long)]
    pub no_drift: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Parses `0..20`, `7` or comma separated mixes such as `0..3,10`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
            let hi: u64 = hi.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
            if hi <= lo {
                return Err(format!("empty seed range '{part}'"));
            }
            seeds.extend(lo..hi);
        } else {
            seeds.push(part.parse().map_err(|_| format!("bad seed '{part}'"))?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

fn parse_all<T: std::str::FromStr>(values: &[String]) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    values.iter().map(|v| v.parse::<T>().map_err(|e| e.to_string())).collect()
}

fn stream_spec(name: &str, label_column: &str) -> Result<StreamSpec, String> {
    if PRESETS.contains(&name.to_ascii_lowercase().as_str()) {
        StreamSpec::preset(name).map_err(|e| e.to_string())
    } else if name.ends_with(".csv") {
        Ok(StreamSpec::csv(name, label_column))
    } else {
        Err(format!("'{name}' is neither a stream preset {PRESETS:?} nor a .csv file"))
    }
}

/// Applies every flag that was given on top of `cfg`.
pub fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), String> {
    if !args.stream.is_empty() {
        cfg.streams = args
            .stream
            .iter()
            .map(|s| stream_spec(s, &args.label_column))
            .collect::<Result<_, _>>()?;
    }
    if !args.budget.is_empty() {
        cfg.budgets = args.budget.clone();
    }
    if !args.delay.is_empty() {
        cfg.delays = args.delay.clone();
    }
    if let Some(d) = &args.delay_dist {
        cfg.delay_dist = d.parse::<DelayKind>().map_err(|e| e.to_string())?;
    }
    if !args.strategy.is_empty() {
        cfg.strategies = parse_all::<StrategyKind>(&args.strategy)?;
    }
    if !args.estimator.is_empty() {
        cfg.estimators = parse_all::<EstimatorKind>(&args.estimator)?;
    }
    if !args.detector.is_empty() {
        cfg.detectors = parse_all::<DetectorKind>(&args.detector)?;
    }
    if let Some(on) = args.dynamic_budget {
        cfg.dynamic_budget = on;
    }
    if !args.m_high.is_empty() {
        cfg.m_high = args.m_high.clone();
    }
    if !args.m_low.is_empty() {
        cfg.m_low = args.m_low.clone();
    }
    if let Some(dt) = args.delta_t {
        cfg.delta_t = dt;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if args.no_steps {
        cfg.write_steps = false;
    }
    Ok(())
}
