//! PRopagate utility estimation.
//!
//! Labels of queried-but-undelivered samples are imputed by a time-weighted
//! vote of their `k` nearest labelled neighbours in the window. The weight of
//! neighbour `j` for pending sample `i` is `exp(-λ (t_i - t_j)²)`, so recent
//! labels dominate older ones. The utility of the incoming sample is then the
//! uncertainty of a classifier trained on the true and imputed labels.

use serde::{Deserialize, Serialize};

use crate::classifier::{sq_dist, Pwc, PwcConfig};
use crate::error::{Error, Result};
use crate::window::{Class, LabelState, SlidingWindow, WindowEntry};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrConfig {
    pub k: usize,
    pub lambda: f64,
}

impl Default for PrConfig {
    fn default() -> Self {
        Self { k: 3, lambda: 0.01 }
    }
}

impl PrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("propagation needs k >= 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "decay coefficient must be a nonnegative number, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

pub fn time_weight(t_i: u64, t_j: u64, lambda: f64) -> f64 {
    let dt = t_i.abs_diff(t_j) as f64;
    (-lambda * dt * dt).exp()
}

/// Labelled neighbour used in the vote.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbour {
    pub t: u64,
    pub label: Class,
    pub sq_dist: f64,
}

/// The `k` labelled entries closest to `x`; equal distances prefer the more
/// recent sample.
pub fn nearest_labeled(labeled: &[&WindowEntry], x: &[f64], k: usize) -> Vec<Neighbour> {
    let mut all: Vec<Neighbour> = labeled
        .iter()
        .filter_map(|e| match e.state {
            LabelState::Labeled(y) => Some(Neighbour {
                t: e.event.t,
                label: y,
                sq_dist: sq_dist(&e.event.x, x),
            }),
            _ => None,
        })
        .collect();
    let by_distance = |a: &Neighbour, b: &Neighbour| a.sq_dist.total_cmp(&b.sq_dist).then(b.t.cmp(&a.t));
    if all.len() > k {
        all.select_nth_unstable_by(k - 1, by_distance);
        all.truncate(k);
    }
    all.sort_by(by_distance);
    all
}

/// Weighted vote for a pending sample at `t`. Tied classes are resolved in
/// favour of the class of the most recent neighbour among them.
pub fn weighted_vote(t: u64, neighbours: &[Neighbour], lambda: f64, n_classes: usize) -> Option<Class> {
    if neighbours.is_empty() {
        return None;
    }
    let mut score = vec![0.0f64; n_classes.max(1 + neighbours.iter().map(|n| n.label).max()?)];
    for n in neighbours {
        score[n.label] += time_weight(t, n.t, lambda);
    }
    let best = score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    neighbours
        .iter()
        .filter(|n| score[n.label] == best)
        .max_by_key(|n| n.t)
        .map(|n| n.label)
}

/// Imputed labels `(t, label)` for every pending entry, computed from the
/// current true labels only. Empty when the window holds no true label.
pub fn propagated_labels(window: &SlidingWindow, cfg: &PrConfig, n_classes: usize) -> Vec<(u64, Class)> {
    let labeled: Vec<&WindowEntry> = window
        .entries()
        .filter(|e| matches!(e.state, LabelState::Labeled(_)))
        .collect();
    if labeled.is_empty() {
        return Vec::new();
    }
    window
        .entries()
        .filter(|e| e.state.is_pending())
        .filter_map(|e| {
            let nn = nearest_labeled(&labeled, &e.event.x, cfg.k);
            weighted_vote(e.event.t, &nn, cfg.lambda, n_classes).map(|y| (e.event.t, y))
        })
        .collect()
}

/// Recomputes the imputed label of every pending entry in place. Without
/// any labelled entry the window is left unchanged.
pub fn propagate_pending(window: &mut SlidingWindow, cfg: &PrConfig, n_classes: usize) {
    let labels = propagated_labels(window, cfg, n_classes);
    if labels.is_empty() {
        return;
    }
    let mut it = labels.into_iter().peekable();
    for e in window.entries_mut() {
        let Some(&(t, y)) = it.peek() else { break };
        if e.event.t != t {
            continue;
        }
        it.next();
        let due = match e.state {
            LabelState::Pending { due } | LabelState::Propagated { due, .. } => due,
            _ => unreachable!("only pending entries receive imputed labels"),
        };
        e.state = LabelState::Propagated { due, label: y };
    }
}

/// Training set of true labels plus freshly imputed labels of pending entries.
fn augmented_set<'a>(window: &'a SlidingWindow, cfg: &PrConfig, n_classes: usize) -> Vec<(&'a [f64], Class)> {
    let imputed = propagated_labels(window, cfg, n_classes);
    let mut imputed = imputed.into_iter().peekable();
    let mut set = Vec::new();
    for e in window.entries() {
        if let LabelState::Labeled(y) = e.state {
            set.push((e.event.x.as_slice(), y));
        } else if let Some(&(t, y)) = imputed.peek() {
            if t == e.event.t {
                set.push((e.event.x.as_slice(), y));
                imputed.next();
            }
        }
    }
    set
}

/// Classifier trained on true and imputed labels.
pub fn pr_model(window: &SlidingWindow, cfg: &PrConfig, model: PwcConfig) -> Result<Pwc> {
    Pwc::fit(model, augmented_set(window, cfg, model.n_classes))
}

/// Classifier trained on true labels only.
pub fn labeled_model(window: &SlidingWindow, model: PwcConfig) -> Result<Pwc> {
    Pwc::fit(model, window.training_set(false))
}

/// Uncertainty `1 - max posterior` of `x` under the PR-augmented classifier.
pub fn utility_pr(window: &SlidingWindow, x: &[f64], cfg: &PrConfig, model: PwcConfig) -> Result<f64> {
    Ok(1.0 - pr_model(window, cfg, model)?.confidence(x)?)
}

/// Uncertainty of `x` when pending queries are ignored.
pub fn utility_ignore_pending(window: &SlidingWindow, x: &[f64], model: PwcConfig) -> Result<f64> {
    Ok(1.0 - labeled_model(window, model)?.confidence(x)?)
}
