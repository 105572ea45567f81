//! Budget accounting and query strategies.
//!
//! The label rate is tracked with an exponentially weighted average `û` of
//! the query indicator. A query is admissible while `û` is strictly below the
//! equally smoothed budget `b̄` made available by the schedule; with a constant
//! budget `b̄ = b`, and after a budget change greedy strategies follow the new
//! level immediately instead of bursting or starving.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::argmax;
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetState {
    /// `B(t)` for the current step.
    pub b_current: f64,
    /// Smoothed budget made available so far.
    pub allowance: f64,
    /// Smoothed realized label rate `û`.
    pub spent: f64,
    /// Averaging memory `s`.
    pub memory: f64,
}

impl BudgetState {
    pub fn new(b: f64, memory: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidConfig(format!("budget {b} outside [0, 1]")));
        }
        if !(memory > 0.0 && memory <= 1.0) {
            return Err(Error::InvalidConfig(format!("budget memory {memory} outside (0, 1]")));
        }
        Ok(Self {
            b_current: b,
            allowance: b,
            spent: 0.0,
            memory,
        })
    }

    /// Budget accounting over a window of `l` samples (`s = 1/l`).
    pub fn for_window(b: f64, l: usize) -> Result<Self> {
        Self::new(b, 1.0 / l.max(1) as f64)
    }

    pub fn budget_available(&self) -> bool {
        self.spent < self.allowance
    }

    /// Sets `B(t)` for a new step and folds it into the allowance.
    pub fn set_budget(&mut self, b: f64) {
        self.b_current = b;
        self.allowance = self.allowance * (1.0 - self.memory) + self.memory * b;
    }

    /// Accounts the decision of the current step.
    pub fn record(&mut self, queried: bool) {
        let q = if queried { 1.0 } else { 0.0 };
        self.spent = self.spent * (1.0 - self.memory) + self.memory * q;
    }
}

/// Per-sample information a strategy may use.
#[derive(Clone, Copy, Debug)]
pub struct QueryInput<'a> {
    /// `1 - max posterior`, higher is more useful.
    pub utility: f64,
    /// Per-class kernel frequency estimates at the sample.
    pub kernel_sums: &'a [f64],
}

pub trait QueryStrategy: Send {
    fn name(&self) -> &'static str;

    /// Returns the query decision `a_n`. Never true while the budget is spent.
    fn decide(&mut self, budget: &BudgetState, input: &QueryInput<'_>, rng: &mut SimRng) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Split,
    Pal,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Split => "split",
            StrategyKind::Pal => "pal",
        }
    }

    pub fn build(&self, reservoir: usize) -> Box<dyn QueryStrategy> {
        match self {
            StrategyKind::Random => Box::new(RandomStrategy),
            StrategyKind::Split => Box::new(SplitState::default()),
            StrategyKind::Pal => Box::new(PalState::new(reservoir, PAL_DRAWS)),
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "rand" => Ok(StrategyKind::Random),
            "split" => Ok(StrategyKind::Split),
            "pal" => Ok(StrategyKind::Pal),
            _ => Err(Error::InvalidConfig(format!("unknown strategy '{s}'"))),
        }
    }
}

pub fn decide_random(budget: &BudgetState, rng: &mut SimRng) -> bool {
    budget.budget_available() && rng.random::<f64>() < budget.b_current
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomStrategy;

impl QueryStrategy for RandomStrategy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn decide(&mut self, budget: &BudgetState, _input: &QueryInput<'_>, rng: &mut SimRng) -> bool {
        decide_random(budget, rng)
    }
}

/// Variable-uncertainty threshold, randomized on half of the decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitState {
    pub theta: f64,
    pub step: f64,
    pub spread: f64,
}

impl Default for SplitState {
    fn default() -> Self {
        Self {
            theta: 1.0,
            step: 0.01,
            spread: 1.0,
        }
    }
}

impl SplitState {
    /// Decision with an explicit threshold multiplier (`1` on the fixed branch).
    pub fn decide_with(&mut self, budget: &BudgetState, utility: f64, multiplier: f64) -> bool {
        if !budget.budget_available() {
            return false;
        }
        let confidence = 1.0 - utility;
        let query = confidence < self.theta * multiplier;
        if query {
            self.theta *= 1.0 - self.step;
        } else {
            self.theta *= 1.0 + self.step;
        }
        query
    }
}

pub fn decide_split(budget: &BudgetState, split: &mut SplitState, utility: f64, rng: &mut SimRng) -> bool {
    if !budget.budget_available() {
        return false;
    }
    let multiplier = if rng.random_bool(0.5) {
        1.0
    } else {
        let eta = Normal::new(1.0, split.spread).expect("valid spread");
        eta.sample(rng).max(0.0)
    };
    split.decide_with(budget, utility, multiplier)
}

impl QueryStrategy for SplitState {
    fn name(&self) -> &'static str {
        "split"
    }

    fn decide(&mut self, budget: &BudgetState, input: &QueryInput<'_>, rng: &mut SimRng) -> bool {
        decide_split(budget, self, input.utility, rng)
    }
}

/// Monte-Carlo draws for the probabilistic gain.
pub const PAL_DRAWS: usize = 100;

/// Probabilistic gain strategy with a rank-based budget rule.
#[derive(Clone, Debug)]
pub struct PalState {
    reservoir: VecDeque<f64>,
    capacity: usize,
    draws: usize,
}

impl PalState {
    pub fn new(capacity: usize, draws: usize) -> Self {
        Self {
            reservoir: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
            draws: draws.max(1),
        }
    }

    fn remember(&mut self, gain: f64) {
        if self.reservoir.len() == self.capacity {
            self.reservoir.pop_front();
        }
        self.reservoir.push_back(gain);
    }

    /// Whether `gain` lies within the top `fraction` of the remembered gains
    /// (including itself).
    fn ranks_within(&self, gain: f64, fraction: f64) -> bool {
        let above = self.reservoir.iter().filter(|&&g| g > gain).count();
        (above as f64) < fraction * self.reservoir.len() as f64
    }
}

/// Expected gain in accuracy at a point with local class frequencies
/// `counts` from acquiring one more label, averaged over local class
/// distributions drawn from `Dirichlet(counts + 1)`.
pub fn probabilistic_gain(counts: &[f64], draws: usize, rng: &mut SimRng) -> f64 {
    let c = counts.len();
    let current = argmax(counts);
    // decision after one more label of each class
    let after: Vec<usize> = (0..c)
        .map(|y| {
            let mut n = counts.to_vec();
            n[y] += 1.0;
            argmax(&n)
        })
        .collect();
    if after.iter().all(|&a| a == current) {
        return 0.0;
    }
    let gammas: Vec<Gamma<f64>> = counts
        .iter()
        .map(|&n| Gamma::new(n.max(0.0) + 1.0, 1.0).expect("positive shape"))
        .collect();
    let mut p = vec![0.0; c];
    let mut total = 0.0;
    for _ in 0..draws {
        let mut sum = 0.0;
        for (pi, g) in p.iter_mut().zip(&gammas) {
            *pi = g.sample(rng);
            sum += *pi;
        }
        for pi in p.iter_mut() {
            *pi /= sum;
        }
        let expected_after: f64 = (0..c).map(|y| p[y] * p[after[y]]).sum();
        total += expected_after - p[current];
    }
    (total / draws as f64).max(0.0)
}

pub fn decide_pal(budget: &BudgetState, pal: &mut PalState, kernel_sums: &[f64], rng: &mut SimRng) -> bool {
    if !budget.budget_available() {
        return false;
    }
    let gain = probabilistic_gain(kernel_sums, pal.draws, rng);
    pal.remember(gain);
    gain > 0.0 && pal.ranks_within(gain, budget.b_current)
}

impl QueryStrategy for PalState {
    fn name(&self) -> &'static str {
        "pal"
    }

    fn decide(&mut self, budget: &BudgetState, input: &QueryInput<'_>, rng: &mut SimRng) -> bool {
        decide_pal(budget, self, input.kernel_sums, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_for, RngStream};

    fn budget(b: f64) -> BudgetState {
        BudgetState::for_window(b, 500).unwrap()
    }

    #[test]
    fn availability_is_strict() {
        let mut s = budget(0.05);
        assert!(s.budget_available());
        s.spent = 0.05;
        assert!(!s.budget_available());
    }

    #[test]
    fn spent_after_constant_querying() {
        let mut s = budget(0.05);
        for _ in 0..1000 {
            s.record(true);
        }
        let expected = 1.0 - 0.998f64.powi(1000);
        assert!((s.spent - expected).abs() < 1e-12);
        assert!((s.spent - 0.86).abs() < 0.01);
        for b in [0.1, 0.5, 0.85] {
            let mut t = s.clone();
            t.b_current = b;
            t.allowance = b;
            assert!(!t.budget_available());
        }
    }

    #[test]
    fn random_extremes() {
        let mut rng = rng_for(0, RngStream::Strategy);
        let mut s = budget(1.0);
        for _ in 0..1000 {
            let q = decide_random(&s, &mut rng);
            assert!(q);
            s.record(q);
        }
        let mut s = budget(0.0);
        for _ in 0..1000 {
            let q = decide_random(&s, &mut rng);
            assert!(!q);
            s.record(q);
        }
    }

    #[test]
    fn random_rate_without_exhaustion() {
        let mut rng = rng_for(1, RngStream::Strategy);
        let s = BudgetState {
            b_current: 0.25,
            allowance: 0.25,
            spent: 0.0,
            memory: 0.002,
        };
        let n = 100_000;
        let hits = (0..n).filter(|_| decide_random(&s, &mut rng)).count();
        assert!((hits as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn split_fixed_branch_rule() {
        let s = budget(0.5);
        let mut split = SplitState::default();
        assert!(split.decide_with(&s, 0.01, 1.0));
        assert!((split.theta - 0.99).abs() < 1e-15);
        assert!(!split.decide_with(&s, 0.0, 1.0));
        assert!((split.theta - 0.99 * 1.01).abs() < 1e-15);
    }

    #[test]
    fn exhausted_budget_blocks_every_strategy() {
        let mut rng = rng_for(2, RngStream::Strategy);
        let mut s = budget(0.1);
        s.spent = 0.2;
        let sums = [0.0, 0.0];
        let input = QueryInput {
            utility: 1.0,
            kernel_sums: &sums,
        };
        for kind in [StrategyKind::Random, StrategyKind::Split, StrategyKind::Pal] {
            let mut strat = kind.build(500);
            assert!((0..200).all(|_| !strat.decide(&s, &input, &mut rng)));
        }
    }

    #[test]
    fn pal_gain_extremes() {
        let mut rng = rng_for(3, RngStream::Strategy);
        let empty = probabilistic_gain(&[0.0, 0.0], 2000, &mut rng);
        // Dirichlet(1,1): E[p0² + p1²] - E[p0] = 2/3 - 1/2
        assert!((empty - 1.0 / 6.0).abs() < 0.01, "{empty}");
        assert_eq!(probabilistic_gain(&[40.0, 0.0], 100, &mut rng), 0.0);
        let mixed = probabilistic_gain(&[0.6, 0.3], 2000, &mut rng);
        assert!(mixed > 0.0 && mixed < empty);
    }

    #[test]
    fn pal_queries_uninformed_regions() {
        let mut rng = rng_for(4, RngStream::Strategy);
        let s = budget(0.05);
        let mut pal = PalState::new(500, PAL_DRAWS);
        for _ in 0..50 {
            decide_pal(&s, &mut pal, &[3.0, 0.2], &mut rng);
        }
        assert!(decide_pal(&s, &mut pal, &[0.0, 0.0], &mut rng));
        assert!(!decide_pal(&s, &mut pal, &[60.0, 0.0], &mut rng));
    }

    #[test]
    fn pal_full_budget_queries_any_positive_gain() {
        let mut rng = rng_for(5, RngStream::Strategy);
        let s = budget(1.0);
        let mut pal = PalState::new(500, PAL_DRAWS);
        for _ in 0..20 {
            decide_pal(&s, &mut pal, &[0.0, 0.0], &mut rng);
        }
        assert!(decide_pal(&s, &mut pal, &[0.9, 0.5], &mut rng));
    }

    #[test]
    fn smoothed_allowance_follows_budget_changes() {
        let mut s = budget(0.05);
        s.spent = 0.05;
        s.set_budget(0.2);
        assert!(s.allowance > 0.05 && s.allowance < 0.2);
        assert!(s.budget_available());
    }
}
