//! Experiment grids, parallel execution and CSV output.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DetectorKind, HdddmConfig};
use crate::error::{Error, Result};
use crate::eval::{simulate, EstimatorKind, RunSummary, RunTrace, SimConfig};
use crate::generators::{StreamSpec, PRESETS};
use crate::oracle::{DelayKind, LatencyDistribution};
use crate::propagate::PrConfig;
use crate::query::StrategyKind;
use crate::schedule::{BudgetSchedule, ScheduleParams};

pub const BUDGET_GRID: [f64; 9] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.40, 0.50, 0.75, 1.0];
pub const DELAY_GRID: [u64; 6] = [0, 50, 100, 150, 200, 300];

pub const STEPS_FILE: &str = "steps.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// A grid of runs. List-valued fields are expanded as a Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub budgets: Vec<f64>,
    pub delays: Vec<u64>,
    pub delay_dist: DelayKind,
    pub strategies: Vec<StrategyKind>,
    pub estimators: Vec<EstimatorKind>,
    pub detectors: Vec<DetectorKind>,
    pub dynamic_budget: bool,
    pub m_high: Vec<f64>,
    pub m_low: Vec<f64>,
    pub delta_t: f64,
    pub window: usize,
    pub init: usize,
    pub seeds: Vec<u64>,
    pub same_step_delivery: bool,
    pub persist_propagated: bool,
    pub bandwidth: Option<f64>,
    /// Write the per-step trace file.
    pub write_steps: bool,
    /// Regenerate synthetic streams from each run seed instead of using the
    /// seed in the stream spec.
    pub resample_streams: bool,
    pub pr: PrConfig,
    pub hdddm: HdddmConfig,
    pub streams: Vec<StreamSpec>,
}

impl Default for ExperimentConfig {
    /// One cell: RBF 2/2 at `b = 0.05`, truncated-normal latency `δ = 200`,
    /// PR with PAL, HDDDM and the dynamic budget, 50 seeds.
    fn default() -> Self {
        let schedule = ScheduleParams::default();
        Self {
            budgets: vec![0.05],
            delays: vec![200],
            delay_dist: DelayKind::TruncNorm,
            strategies: vec![StrategyKind::Pal],
            estimators: vec![EstimatorKind::Pr],
            detectors: vec![DetectorKind::Hdddm],
            dynamic_budget: true,
            m_high: vec![schedule.m_high],
            m_low: vec![schedule.m_low],
            delta_t: schedule.delta_t,
            window: 500,
            init: 100,
            seeds: (0..50).collect(),
            same_step_delivery: false,
            persist_propagated: false,
            bandwidth: None,
            write_steps: true,
            resample_streams: false,
            pr: PrConfig::default(),
            hdddm: HdddmConfig::default(),
            streams: vec![StreamSpec::preset("rbf_2_2").expect("known preset")],
        }
    }
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const CONFIG_PRESETS: [&str; 2] = ["default", "paper-defaults"];

impl ExperimentConfig {
    /// `default` is a single cell; `paper-defaults` is the full benchmark grid
    /// over every stream preset, budget, latency, strategy and estimator with
    /// a static budget.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "paper-defaults" => Ok(Self {
                budgets: BUDGET_GRID.to_vec(),
                delays: DELAY_GRID.to_vec(),
                strategies: vec![StrategyKind::Random, StrategyKind::Split, StrategyKind::Pal],
                estimators: vec![EstimatorKind::Pr, EstimatorKind::IgnorePending],
                dynamic_budget: false,
                streams: PRESETS
                    .iter()
                    .map(|p| StreamSpec::preset(p))
                    .collect::<Result<_>>()?,
                ..Self::default()
            }),
            other => Err(Error::InvalidConfig(format!(
                "unknown config preset '{other}' (expected one of {CONFIG_PRESETS:?})"
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("budgets", self.budgets.len()),
            ("delays", self.delays.len()),
            ("strategies", self.strategies.len()),
            ("estimators", self.estimators.len()),
            ("detectors", self.detectors.len()),
            ("m_high", self.m_high.len()),
            ("m_low", self.m_low.len()),
            ("seeds", self.seeds.len()),
            ("streams", self.streams.len()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidConfig(format!("'{name}' must not be empty")));
        }
        for &b in &self.budgets {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::InvalidConfig(format!("budget {b} outside (0, 1]")));
            }
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        for s in &self.streams {
            s.validate()?;
        }
        for cell in self.cells() {
            cell.sim.validate()?;
            if let Some(params) = &cell.sim.dynamic {
                BudgetSchedule::from_multipliers(cell.sim.budget, params)?;
            }
        }
        Ok(())
    }

    /// Grid cells in a fixed order; seeds are not part of a cell.
    pub fn cells(&self) -> Vec<Cell> {
        let schedules: Vec<Option<ScheduleParams>> = if self.dynamic_budget {
            let mut v = Vec::new();
            for &m_high in &self.m_high {
                for &m_low in &self.m_low {
                    v.push(Some(ScheduleParams {
                        m_high,
                        m_low,
                        delta_t: self.delta_t,
                    }));
                }
            }
            v
        } else {
            vec![None]
        };
        let mut cells = Vec::new();
        for (si, stream) in self.streams.iter().enumerate() {
            for &budget in &self.budgets {
                for &delay in &self.delays {
                    for &strategy in &self.strategies {
                        for &estimator in &self.estimators {
                            for &detector in &self.detectors {
                                for &dynamic in &schedules {
                                    let sim = SimConfig {
                                        window: self.window,
                                        init: self.init,
                                        budget,
                                        latency: LatencyDistribution {
                                            kind: self.delay_dist,
                                            delta: delay,
                                        },
                                        same_step_delivery: self.same_step_delivery,
                                        strategy,
                                        estimator,
                                        detector,
                                        hdddm: self.hdddm,
                                        dynamic,
                                        pr: self.pr,
                                        persist_propagated: self.persist_propagated,
                                        bandwidth: self.bandwidth,
                                    };
                                    cells.push(Cell {
                                        id: cell_id(&stream.name, &sim),
                                        stream: si,
                                        sim,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn run_count(&self) -> usize {
        self.cells().len() * self.seeds.len()
    }
}

/// One point of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub id: String,
    /// Index into [`ExperimentConfig::streams`].
    pub stream: usize,
    pub sim: SimConfig,
}

fn cell_id(stream: &str, sim: &SimConfig) -> String {
    let schedule = match &sim.dynamic {
        Some(p) => format!("dyn{}x{}", p.m_high, p.m_low),
        None => "static".into(),
    };
    format!(
        "{stream}|b={}|{}={}|{}|{}|{}|{schedule}",
        sim.budget,
        sim.latency.kind.as_str(),
        sim.latency.delta,
        sim.strategy.as_str(),
        sim.estimator.as_str(),
        sim.detector.as_str(),
    )
}

/// A finished run and the cell it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRun {
    pub cell: Cell,
    pub stream_name: String,
    pub trace: RunTrace,
}

/// Runs every cell for every seed in parallel. Run seeds drive latency and
/// query randomness; the data come from the stream spec unless
/// `resample_streams` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellRun>> {
    cfg.validate()?;
    let jobs: Vec<(Cell, u64)> = cfg
        .cells()
        .into_iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();
    jobs.into_par_iter()
        .map(|(cell, seed)| {
            let mut spec = cfg.streams[cell.stream].clone();
            if cfg.resample_streams {
                spec = spec.with_seed(seed);
            }
            let stream = spec.build()?;
            let trace = simulate(&cell.sim, &stream, seed)?;
            Ok(CellRun {
                stream_name: spec.name,
                cell,
                trace,
            })
        })
        .collect()
}

/// Writes through a temporary file in the target directory and renames it
/// over `path`, so readers never observe a partial file.
pub fn write_atomically(path: &Path, write: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Per-run row of `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub stream: String,
    pub budget: f64,
    pub delay_dist: String,
    pub delay: u64,
    pub strategy: String,
    pub estimator: String,
    pub detector: String,
    pub dynamic: bool,
    pub seed: u64,
    pub accuracy: f64,
    pub queries: u64,
    pub query_rate: f64,
    pub detections: usize,
    pub h_score: Option<f64>,
    pub dropped_deliveries: u64,
}

impl RunRow {
    fn new(run: &CellRun) -> Self {
        let s: &RunSummary = &run.trace.summary;
        let sim = &run.cell.sim;
        Self {
            run_id: run.cell.id.clone(),
            stream: run.stream_name.clone(),
            budget: sim.budget,
            delay_dist: sim.latency.kind.as_str().into(),
            delay: sim.latency.delta,
            strategy: sim.strategy.as_str().into(),
            estimator: sim.estimator.as_str().into(),
            detector: sim.detector.as_str().into(),
            dynamic: sim.dynamic.is_some(),
            seed: run.trace.seed,
            accuracy: s.accuracy,
            queries: s.queries,
            query_rate: s.query_rate,
            detections: s.detections.len(),
            h_score: s.h_score,
            dropped_deliveries: s.dropped_deliveries,
        }
    }
}

/// Per-cell row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub run_id: String,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub query_rate_mean: f64,
    pub detections_mean: f64,
    pub h_score_mean: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Aggregates runs per cell, in order of first appearance.
pub fn summarize(runs: &[CellRun]) -> Vec<CellSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.cell.id.as_str()) {
            order.push(&r.cell.id);
        }
    }
    order
        .into_iter()
        .map(|id| {
            let group: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.cell.id == id)
                .map(|r| &r.trace.summary)
                .collect();
            let acc: Vec<f64> = group.iter().map(|s| s.accuracy).collect();
            let qr: Vec<f64> = group.iter().map(|s| s.query_rate).collect();
            let det: Vec<f64> = group.iter().map(|s| s.detections.len() as f64).collect();
            let h: Vec<f64> = group.iter().filter_map(|s| s.h_score).collect();
            CellSummary {
                run_id: id.to_string(),
                runs: group.len(),
                accuracy_mean: mean(&acc),
                accuracy_std: std_dev(&acc),
                query_rate_mean: mean(&qr),
                detections_mean: mean(&det),
                h_score_mean: (!h.is_empty()).then(|| mean(&h)),
            }
        })
        .collect()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes `steps.csv`, `runs.csv` and `summary.csv` into `dir`, replacing
/// earlier files atomically.
pub fn emit_results(runs: &[CellRun], dir: impl AsRef<Path>, write_steps: bool) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if write_steps {
        let path = dir.join(STEPS_FILE);
        write_atomically(&path, |file| {
            let mut w = csv::Writer::from_writer(file);
            w.write_record([
                "run_id",
                "seed",
                "t",
                "queried",
                "n_delivered",
                "correct",
                "acc_preq",
                "drift",
                "budget",
                "spent",
            ])?;
            for run in runs {
                let seed = run.trace.seed.to_string();
                for s in &run.trace.steps {
                    w.write_record([
                        run.cell.id.as_str(),
                        &seed,
                        &s.t.to_string(),
                        flag(s.queried),
                        &s.n_delivered.to_string(),
                        s.correct.map(flag).unwrap_or(""),
                        &s.acc_preq.map(|a| a.to_string()).unwrap_or_default(),
                        flag(s.drift),
                        &s.budget.to_string(),
                        &s.spent.to_string(),
                    ])?;
                }
            }
            w.flush().map_err(|e| Error::io(&path, e))
        })?;
    }
    write_rows(&dir.join(RUNS_FILE), runs.iter().map(RunRow::new), RUN_HEADER)?;
    write_rows(&dir.join(SUMMARY_FILE), summarize(runs).into_iter(), SUMMARY_HEADER)?;
    Ok(())
}

const RUN_HEADER: &[&str] = &[
    "run_id",
    "stream",
    "budget",
    "delay_dist",
    "delay",
    "strategy",
    "estimator",
    "detector",
    "dynamic",
    "seed",
    "accuracy",
    "queries",
    "query_rate",
    "detections",
    "h_score",
    "dropped_deliveries",
];

const SUMMARY_HEADER: &[&str] = &[
    "run_id",
    "runs",
    "accuracy_mean",
    "accuracy_std",
    "query_rate_mean",
    "detections_mean",
    "h_score_mean",
];

/// Serializes rows; the header is written explicitly so that an empty set
/// still yields a header-only file.
fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>, header: &[&str]) -> Result<()> {
    write_atomically(path, |file| {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    })
}

/// Reads a `runs.csv` file.
pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
