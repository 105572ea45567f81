//! Labelling oracle with verification latency.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::window::Class;

/// Fixed part of the uniform latency distribution.
pub const UNIFORM_BASE_DELAY: u64 = 50;
/// Standard deviation of the truncated normal latency distribution.
pub const TRUNCNORM_STD: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    /// `δ_n ~ U{50, ..., 50 + δ}`
    Uniform,
    /// `δ_n = max(0, round(N(δ, 50)))`
    #[serde(rename = "truncnorm", alias = "trunc_norm")]
    TruncNorm,
}

impl DelayKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DelayKind::Uniform => "uniform",
            DelayKind::TruncNorm => "truncnorm",
        }
    }
}

impl std::str::FromStr for DelayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DelayKind::Uniform),
            "truncnorm" | "trunc_norm" => Ok(DelayKind::TruncNorm),
            _ => Err(Error::InvalidConfig(format!("unknown delay distribution '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyDistribution {
    pub kind: DelayKind,
    pub delta: u64,
}

impl LatencyDistribution {
    pub fn uniform(delta: u64) -> Self {
        Self {
            kind: DelayKind::Uniform,
            delta,
        }
    }

    pub fn truncnorm(delta: u64) -> Self {
        Self {
            kind: DelayKind::TruncNorm,
            delta,
        }
    }

    /// Draws one delay in whole time steps.
    pub fn sample_delay(&self, rng: &mut SimRng) -> u64 {
        match self.kind {
            DelayKind::Uniform => {
                rng.random_range(UNIFORM_BASE_DELAY..=UNIFORM_BASE_DELAY + self.delta)
            }
            DelayKind::TruncNorm => {
                let normal = Normal::new(self.delta as f64, TRUNCNORM_STD).expect("valid normal");
                normal.sample(rng).round().max(0.0) as u64
            }
        }
    }
}

/// A queried sample whose label is held back until `due`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PendingQuery {
    // field order gives the (due, t_query) heap ordering
    pub due: u64,
    pub t_query: u64,
    pub y: Class,
}

/// Perfect oracle that delivers each queried label once, at its due time.
#[derive(Clone, Debug)]
pub struct Oracle {
    dist: LatencyDistribution,
    heap: BinaryHeap<Reverse<PendingQuery>>,
    queried: HashSet<u64>,
}

impl Oracle {
    pub fn new(dist: LatencyDistribution) -> Self {
        Self {
            dist,
            heap: BinaryHeap::new(),
            queried: HashSet::new(),
        }
    }

    pub fn distribution(&self) -> LatencyDistribution {
        self.dist
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Registers a query for the sample at `t_query` and returns its due time.
    pub fn enqueue_query(&mut self, t_query: u64, y: Class, t_now: u64, rng: &mut SimRng) -> Result<u64> {
        let delay = self.dist.sample_delay(rng);
        self.enqueue_with_delay(t_query, y, t_now, delay)
    }

    pub fn enqueue_with_delay(&mut self, t_query: u64, y: Class, t_now: u64, delay: u64) -> Result<u64> {
        if !self.queried.insert(t_query) {
            return Err(Error::DuplicateQuery(t_query));
        }
        let due = t_now + delay;
        self.heap.push(Reverse(PendingQuery { due, t_query, y }));
        Ok(due)
    }

    /// Removes and returns every query due at or before `t_now`, ordered by
    /// `(due, t_query)`.
    pub fn deliver_due(&mut self, t_now: u64) -> Vec<PendingQuery> {
        let mut out = Vec::new();
        while let Some(Reverse(q)) = self.heap.peek() {
            if q.due > t_now {
                break;
            }
            out.push(*q);
            self.heap.pop();
        }
        out
    }
}
