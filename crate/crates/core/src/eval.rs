//! Prequential (test-then-train) simulation and drift-detection scoring.
//!
//! Every step runs the same fixed phases:
//! 1. labels due at `t` are delivered, attached to the window and their
//!    prediction errors fed to a supervised detector;
//! 2. the sample is pushed into the window;
//! 3. pending labels are propagated (PR only) and the sample is predicted
//!    by a model trained on the window, which holds no label of this sample;
//! 4. an unsupervised detector sees `x`;
//! 5. `B(t)` is taken from the schedule;
//! 6. the utility of the sample is computed;
//! 7. the strategy decides and a query goes to the oracle;
//! 8. the step is recorded. The model of the next step is rebuilt from the
//!    updated window.

use serde::{Deserialize, Serialize};

use crate::classifier::{default_bandwidth, Pwc, PwcConfig};
use crate::drift::{Detector, DetectorKind, HdddmConfig};
use crate::error::{Error, Result};
use crate::generators::Stream;
use crate::oracle::{LatencyDistribution, Oracle};
use crate::propagate::{propagate_pending, PrConfig};
use crate::query::{BudgetState, QueryInput, QueryStrategy, StrategyKind};
use crate::rng::{rng_for, RngStream, SimRng};
use crate::schedule::{BudgetSchedule, ScheduleParams};
use crate::window::{Class, SlidingWindow, StreamEvent};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Pr,
    IgnorePending,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Pr => "pr",
            EstimatorKind::IgnorePending => "ignore_pending",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pr" | "propagate" => Ok(EstimatorKind::Pr),
            "ignore_pending" | "ignore-pending" | "ignore" => Ok(EstimatorKind::IgnorePending),
            _ => Err(Error::InvalidConfig(format!("unknown estimator '{s}'"))),
        }
    }
}

/// Everything a single run needs besides the stream and the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub window: usize,
    pub init: usize,
    pub budget: f64,
    pub latency: LatencyDistribution,
    /// Deliver zero-delay labels within the querying step instead of at the
    /// start of the next one.
    pub same_step_delivery: bool,
    pub strategy: StrategyKind,
    pub estimator: EstimatorKind,
    pub detector: DetectorKind,
    pub hdddm: HdddmConfig,
    /// `Some` enables the drift-driven budget schedule.
    pub dynamic: Option<ScheduleParams>,
    pub pr: PrConfig,
    /// Also train the prediction model on imputed labels. When off, imputed
    /// labels only shape the utility.
    pub persist_propagated: bool,
    /// Kernel bandwidth; `None` derives it from the initialization samples.
    pub bandwidth: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            window: 500,
            init: 100,
            budget: 0.05,
            latency: LatencyDistribution::truncnorm(200),
            same_step_delivery: false,
            strategy: StrategyKind::Split,
            estimator: EstimatorKind::Pr,
            detector: DetectorKind::None,
            hdddm: HdddmConfig::default(),
            dynamic: None,
            pr: PrConfig::default(),
            persist_propagated: false,
            bandwidth: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("window size must be positive".into()));
        }
        if self.init == 0 {
            return Err(Error::InvalidConfig("initialization needs at least one sample".into()));
        }
        if !(0.0..=1.0).contains(&self.budget) {
            return Err(Error::InvalidConfig(format!("budget {} outside [0, 1]", self.budget)));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidConfig(format!("bandwidth {h} must be positive")));
            }
        }
        self.pr.validate()?;
        if let Some(params) = &self.dynamic {
            BudgetSchedule::from_multipliers(self.budget, params)?;
        }
        Ok(())
    }
}

/// One row of the step trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    /// `None` for initialization samples.
    pub y_pred: Option<Class>,
    pub y_true: Class,
    pub queried: bool,
    pub n_delivered: u32,
    pub correct: Option<bool>,
    /// Running prequential accuracy after this step.
    pub acc_preq: Option<f64>,
    pub drift: bool,
    pub budget: f64,
    pub spent: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub accuracy: f64,
    pub evaluated: u64,
    pub queries: u64,
    pub query_rate: f64,
    pub detections: Vec<u64>,
    pub h_score: Option<f64>,
    pub dropped_deliveries: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Mutable state of one run.
pub struct Simulation {
    cfg: SimConfig,
    dim: usize,
    model_cfg: PwcConfig,
    window: SlidingWindow,
    oracle: Oracle,
    detector: Detector,
    schedule: Option<BudgetSchedule>,
    budget: BudgetState,
    strategy: Box<dyn QueryStrategy>,
    oracle_rng: SimRng,
    strategy_rng: SimRng,
    /// Predictions of evaluated samples still inside the delivery horizon.
    predictions: std::collections::HashMap<u64, Class>,
    correct: u64,
    evaluated: u64,
    queries: u64,
    detections: Vec<u64>,
}

impl Simulation {
    /// Builds the components and trains them on the fully labelled `init`
    /// samples.
    pub fn new(cfg: SimConfig, init: &[StreamEvent], n_classes: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let Some(first) = init.first() else {
            return Err(Error::InvalidConfig("no initialization samples".into()));
        };
        let dim = first.x.len();
        let bandwidth = match cfg.bandwidth {
            Some(h) => h,
            None => default_bandwidth(init.iter().map(|e| e.x.as_slice())),
        };
        let model_cfg = PwcConfig { bandwidth, n_classes };
        let mut window = SlidingWindow::new(cfg.window)?;
        let mut detector = Detector::new(cfg.detector, cfg.hdddm)?;
        for e in init {
            window.push_sample(e.clone())?;
            window.attach_label(e.t, e.y)?;
            detector.observe_sample(&e.x);
        }
        let schedule = match &cfg.dynamic {
            Some(params) => Some(BudgetSchedule::from_multipliers(cfg.budget, params)?),
            None => None,
        };
        Ok(Self {
            dim,
            model_cfg,
            window,
            oracle: Oracle::new(cfg.latency),
            detector,
            schedule,
            budget: BudgetState::for_window(cfg.budget, cfg.window)?,
            strategy: cfg.strategy.build(cfg.window),
            oracle_rng: rng_for(seed, RngStream::Oracle),
            strategy_rng: rng_for(seed, RngStream::Strategy),
            predictions: Default::default(),
            correct: 0,
            evaluated: 0,
            queries: 0,
            detections: Vec::new(),
            cfg,
        })
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn model_config(&self) -> PwcConfig {
        self.model_cfg
    }

    pub fn detections(&self) -> &[u64] {
        &self.detections
    }

    fn deliver(&mut self, t: u64) -> Result<(u32, bool)> {
        let mut drift = false;
        let delivered = self.oracle.deliver_due(t);
        for q in &delivered {
            self.window.attach_label(q.t_query, q.y)?;
            if let Some(pred) = self.predictions.remove(&q.t_query) {
                drift |= self.detector.observe_error(pred != q.y);
            }
        }
        Ok((delivered.len() as u32, drift))
    }

    fn on_drift(&mut self, t: u64) {
        self.detections.push(t);
        if let Some(s) = self.schedule.as_mut() {
            s.on_drift(t);
        }
    }

    /// Runs all phases for one incoming sample.
    pub fn step(&mut self, event: &StreamEvent) -> Result<StepRecord> {
        if event.x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: event.x.len(),
            });
        }
        let t = event.t;

        let (mut n_delivered, mut drift) = self.deliver(t)?;

        self.window.push_sample(event.clone())?;

        let model = match self.cfg.estimator {
            EstimatorKind::Pr => {
                propagate_pending(&mut self.window, &self.cfg.pr, self.model_cfg.n_classes);
                Pwc::fit(self.model_cfg, self.window.training_set(true))?
            }
            EstimatorKind::IgnorePending => Pwc::fit(self.model_cfg, self.window.training_set(false))?,
        };
        let predict_model = if self.cfg.estimator == EstimatorKind::Pr && !self.cfg.persist_propagated {
            Some(Pwc::fit(self.model_cfg, self.window.training_set(false))?)
        } else {
            None
        };
        let y_pred = predict_model.as_ref().unwrap_or(&model).predict(&event.x)?;
        let correct = y_pred == event.y;
        self.evaluated += 1;
        self.correct += u64::from(correct);
        self.predictions.insert(t, y_pred);

        if self.detector.observe_sample(&event.x) {
            drift = true;
        }
        if drift {
            self.on_drift(t);
        }

        let b_t = match &self.schedule {
            Some(s) => s.budget_at(t),
            None => self.cfg.budget,
        };
        self.budget.set_budget(b_t);

        let posterior = model.posterior(&event.x)?;
        let utility = 1.0 - posterior.iter().cloned().fold(0.0, f64::max);
        let kernel_sums = model.kernel_sums(&event.x)?;
        let input = QueryInput {
            utility,
            kernel_sums: &kernel_sums,
        };
        let queried = self.strategy.decide(&self.budget, &input, &mut self.strategy_rng);
        if queried {
            let due = self.oracle.enqueue_query(t, event.y, t, &mut self.oracle_rng)?;
            self.window.mark_pending(t, due)?;
            self.queries += 1;
            if self.cfg.same_step_delivery && due <= t {
                let (n, d) = self.deliver(t)?;
                n_delivered += n;
                if d && !drift {
                    drift = true;
                    self.on_drift(t);
                }
            }
        } else {
            // an unqueried sample can never be scored by a supervised detector
            self.predictions.remove(&t);
        }
        self.budget.record(queried);

        Ok(StepRecord {
            t,
            y_pred: Some(y_pred),
            y_true: event.y,
            queried,
            n_delivered,
            correct: Some(correct),
            acc_preq: Some(self.correct as f64 / self.evaluated as f64),
            drift,
            budget: b_t,
            spent: self.budget.spent,
        })
    }

    pub fn summary(&self, true_drift: Option<u64>, h_window: f64) -> RunSummary {
        RunSummary {
            accuracy: if self.evaluated == 0 {
                0.0
            } else {
                self.correct as f64 / self.evaluated as f64
            },
            evaluated: self.evaluated,
            queries: self.queries,
            query_rate: if self.evaluated == 0 {
                0.0
            } else {
                self.queries as f64 / self.evaluated as f64
            },
            detections: self.detections.clone(),
            h_score: true_drift.map(|d| {
                h_score(&DetectionRecord {
                    true_drift: d,
                    detections: self.detections.clone(),
                    window: h_window,
                })
            }),
            dropped_deliveries: self.window.dropped_deliveries(),
        }
    }
}

/// Acceptance window of the H-score for a run: the adjustment span when the
/// budget is dynamic, else its default.
pub fn h_window(cfg: &SimConfig) -> f64 {
    cfg.dynamic.unwrap_or_default().delta_t
}

/// Runs a whole stream: the first `cfg.init` samples initialize the learner
/// and are recorded without prediction.
pub fn simulate(cfg: &SimConfig, stream: &Stream, seed: u64) -> Result<RunTrace> {
    if stream.len() <= cfg.init {
        return Err(Error::InvalidConfig(format!(
            "stream '{}' has {} samples, initialization needs more than {}",
            stream.name,
            stream.len(),
            cfg.init
        )));
    }
    let (init, rest) = stream.events.split_at(cfg.init);
    let mut sim = Simulation::new(cfg.clone(), init, stream.n_classes, seed)?;
    let mut steps = Vec::with_capacity(stream.len());
    steps.extend(init.iter().map(|e| StepRecord {
        t: e.t,
        y_pred: None,
        y_true: e.y,
        queried: false,
        n_delivered: 0,
        correct: None,
        acc_preq: None,
        drift: false,
        budget: cfg.budget,
        spent: 0.0,
    }));
    for e in rest {
        steps.push(sim.step(e)?);
    }
    let summary = sim.summary(stream.drift.as_ref().map(|d| d.start_t), h_window(cfg));
    Ok(RunTrace { seed, steps, summary })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub true_drift: u64,
    pub detections: Vec<u64>,
    /// Acceptance window `W`.
    pub window: f64,
}

/// Harmonic mean of detection precision and timeliness.
///
/// The first detection in `[drift, drift + W]` is the match; every other
/// detection is a false alarm. Precision is the matched share of all
/// detections and timeliness is `1 - delay / W` for the match, floored at 0.
pub fn h_score(record: &DetectionRecord) -> f64 {
    if record.detections.is_empty() {
        return 0.0;
    }
    let lo = record.true_drift as f64;
    let hi = lo + record.window;
    // only the first detection inside the window is a true one
    let first = record
        .detections
        .iter()
        .map(|&d| d as f64)
        .filter(|&d| d >= lo && d <= hi)
        .reduce(f64::min);
    let precision = if first.is_some() { 1.0 } else { 0.0 } / record.detections.len() as f64;
    let timeliness = match first {
        Some(d) if record.window > 0.0 => (1.0 - (d - lo) / record.window).max(0.0),
        Some(_) => 1.0,
        None => 0.0,
    };
    if precision + timeliness == 0.0 {
        0.0
    } else {
        2.0 * precision * timeliness / (precision + timeliness)
    }
}
