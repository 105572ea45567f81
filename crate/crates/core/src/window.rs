//! Timestamped samples and the sliding training window.
//!
//! The window keeps exactly the last `capacity` samples (one sample arrives
//! per time step). Each entry carries a label state; a true label is terminal
//! and always overrides an imputed one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class index.
pub type Class = usize;

/// A sample arriving at time step `t`. `y` is hidden from the learner and is
/// only read by the oracle and the evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub t: u64,
    pub x: Vec<f64>,
    pub y: Class,
}

impl StreamEvent {
    pub fn new(t: u64, x: Vec<f64>, y: Class) -> Self {
        Self { t, x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelState {
    Unlabeled,
    /// Queried, label due at `due`.
    Pending { due: u64 },
    Labeled(Class),
    /// Queried and still pending, with a label imputed from its neighbours.
    Propagated { due: u64, label: Class },
}

impl LabelState {
    pub fn is_pending(&self) -> bool {
        matches!(self, LabelState::Pending { .. } | LabelState::Propagated { .. })
    }

    /// Label usable for training, if any.
    pub fn training_label(&self, include_propagated: bool) -> Option<Class> {
        match *self {
            LabelState::Labeled(y) => Some(y),
            LabelState::Propagated { label, .. } if include_propagated => Some(label),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowEntry {
    pub event: StreamEvent,
    pub state: LabelState,
}

/// Result of delivering a label to the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attach {
    Attached,
    /// The sample had already left the window; the label is discarded.
    Dropped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlidingWindow {
    capacity: usize,
    entries: VecDeque<WindowEntry>,
    dropped: u64,
}

/// Borrowed view of the window split by label state.
#[derive(Debug, Default)]
pub struct Partition<'a> {
    pub labeled: Vec<&'a WindowEntry>,
    pub pending: Vec<&'a WindowEntry>,
    pub unlabeled: Vec<&'a WindowEntry>,
    pub propagated: Vec<&'a WindowEntry>,
}

impl Partition<'_> {
    pub fn total(&self) -> usize {
        self.labeled.len() + self.pending.len() + self.unlabeled.len() + self.propagated.len()
    }
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("window capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
            dropped: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Deliveries that arrived after their sample was evicted.
    pub fn dropped_deliveries(&self) -> u64 {
        self.dropped
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &WindowEntry> + '_ {
        self.entries.iter()
    }

    pub(crate) fn entries_mut(&mut self) -> impl Iterator<Item = &mut WindowEntry> + '_ {
        self.entries.iter_mut()
    }

    pub fn newest(&self) -> Option<&WindowEntry> {
        self.entries.back()
    }

    pub fn oldest(&self) -> Option<&WindowEntry> {
        self.entries.front()
    }

    /// Appends `event` as unlabeled, evicting the oldest entry when full.
    /// Returns the evicted entry, if any.
    pub fn push_sample(&mut self, event: StreamEvent) -> Result<Option<WindowEntry>> {
        if let Some(newest) = self.entries.back() {
            if event.t <= newest.event.t {
                return Err(Error::NonMonotoneTime {
                    newest: newest.event.t,
                    got: event.t,
                });
            }
            if event.x.len() != newest.event.x.len() {
                return Err(Error::DimensionMismatch {
                    expected: newest.event.x.len(),
                    got: event.x.len(),
                });
            }
        }
        self.entries.push_back(WindowEntry {
            event,
            state: LabelState::Unlabeled,
        });
        if self.entries.len() > self.capacity {
            Ok(self.entries.pop_front())
        } else {
            Ok(None)
        }
    }

    fn position(&self, t: u64) -> Option<usize> {
        self.entries.binary_search_by_key(&t, |e| e.event.t).ok()
    }

    pub fn get(&self, t: u64) -> Option<&WindowEntry> {
        self.position(t).map(|i| &self.entries[i])
    }

    /// Delivers the true label for the sample at `t`.
    ///
    /// A delivery to an evicted sample is a defined no-op counted in
    /// [`dropped_deliveries`](Self::dropped_deliveries); a second delivery to a
    /// labeled sample is rejected.
    pub fn attach_label(&mut self, t: u64, y: Class) -> Result<Attach> {
        match self.position(t) {
            Some(i) => {
                let entry = &mut self.entries[i];
                if let LabelState::Labeled(_) = entry.state {
                    return Err(Error::DuplicateDelivery(t));
                }
                entry.state = LabelState::Labeled(y);
                Ok(Attach::Attached)
            }
            None => {
                self.dropped += 1;
                Ok(Attach::Dropped)
            }
        }
    }

    /// Marks the sample at `t` as queried with its label due at `due`.
    pub fn mark_pending(&mut self, t: u64, due: u64) -> Result<()> {
        let i = self
            .position(t)
            .ok_or_else(|| Error::InvalidConfig(format!("sample t={t} is not in the window")))?;
        match self.entries[i].state {
            LabelState::Unlabeled => {
                self.entries[i].state = LabelState::Pending { due };
                Ok(())
            }
            _ => Err(Error::DuplicateQuery(t)),
        }
    }

    /// Drops every imputed label, returning those entries to `Pending`.
    pub fn clear_propagated(&mut self) {
        for e in self.entries.iter_mut() {
            if let LabelState::Propagated { due, .. } = e.state {
                e.state = LabelState::Pending { due };
            }
        }
    }

    pub fn partition(&self) -> Partition<'_> {
        let mut p = Partition::default();
        for e in &self.entries {
            match e.state {
                LabelState::Unlabeled => p.unlabeled.push(e),
                LabelState::Pending { .. } => p.pending.push(e),
                LabelState::Labeled(_) => p.labeled.push(e),
                LabelState::Propagated { .. } => p.propagated.push(e),
            }
        }
        p
    }

    /// `(x, y)` pairs usable for training.
    pub fn training_set(&self, include_propagated: bool) -> Vec<(&[f64], Class)> {
        self.entries
            .iter()
            .filter_map(|e| {
                e.state
                    .training_label(include_propagated)
                    .map(|y| (e.event.x.as_slice(), y))
            })
            .collect()
    }
}
