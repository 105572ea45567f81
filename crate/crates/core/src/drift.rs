//! Concept drift detectors.
//!
//! DDM and ADWIN watch the error stream of actively labelled samples, HDDDM
//! compares feature histograms of consecutive batches and needs no labels.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdmSignal {
    Stable,
    Warning,
    Drift,
}

/// Drift Detection Method on a 0/1 error stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Ddm {
    pub n_min: u64,
    n: u64,
    errors: u64,
    p_min: f64,
    s_min: f64,
}

impl Default for Ddm {
    fn default() -> Self {
        Self::new(30)
    }
}

impl Ddm {
    pub fn new(n_min: u64) -> Self {
        Self {
            n_min,
            n: 0,
            errors: 0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.n_min);
    }

    pub fn observed(&self) -> u64 {
        self.n
    }

    /// Running error rate and its standard deviation.
    pub fn rate(&self) -> (f64, f64) {
        if self.n == 0 {
            return (0.0, 0.0);
        }
        let p = self.errors as f64 / self.n as f64;
        (p, (p * (1.0 - p) / self.n as f64).sqrt())
    }

    pub fn update(&mut self, error: bool) -> DdmSignal {
        self.n += 1;
        self.errors += u64::from(error);
        if self.n < self.n_min {
            return DdmSignal::Stable;
        }
        let (p, s) = self.rate();
        if p + s <= self.p_min + self.s_min {
            self.p_min = p;
            self.s_min = s;
        }
        // Strict comparisons: an all-correct stream has p = s = 0 everywhere.
        if p + s > self.p_min + 3.0 * self.s_min {
            self.reset();
            DdmSignal::Drift
        } else if p + s > self.p_min + 2.0 * self.s_min {
            DdmSignal::Warning
        } else {
            DdmSignal::Stable
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Bucket {
    sum: f64,
    size: u64,
}

/// Adaptive windowing with exponential-histogram compression.
#[derive(Clone, Debug, PartialEq)]
pub struct Adwin {
    pub delta: f64,
    /// Buckets kept per size before the two oldest are merged.
    pub max_buckets: usize,
    /// Minimum length of each sub-window at a cut.
    pub min_side: u64,
    buckets: VecDeque<Bucket>,
    total: f64,
    width: u64,
}

impl Default for Adwin {
    fn default() -> Self {
        Self::new(0.002)
    }
}

impl Adwin {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            max_buckets: 5,
            min_side: 5,
            buckets: VecDeque::new(),
            total: 0.0,
            width: 0,
        }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    /// Hoeffding cut threshold for sub-windows of `n0` and `n1` items.
    pub fn epsilon_cut(&self, n0: u64, n1: u64) -> f64 {
        let m = 1.0 / (1.0 / n0 as f64 + 1.0 / n1 as f64);
        let delta_prime = self.delta / self.width as f64;
        ((1.0 / (2.0 * m)) * (4.0 / delta_prime).ln()).sqrt()
    }

    fn compress(&mut self) {
        // buckets run oldest (largest) to newest (size 1)
        let mut size = 1u64;
        loop {
            let same: Vec<usize> = (0..self.buckets.len())
                .filter(|&i| self.buckets[i].size == size)
                .collect();
            if same.len() <= self.max_buckets {
                break;
            }
            let (a, b) = (same[0], same[1]);
            self.buckets[a] = Bucket {
                sum: self.buckets[a].sum + self.buckets[b].sum,
                size: 2 * size,
            };
            self.buckets.remove(b);
            size *= 2;
        }
    }

    /// First admissible cut whose sub-window means differ by more than the
    /// threshold, as the number of leading buckets to drop.
    fn find_cut(&self) -> Option<usize> {
        let mut n0 = 0u64;
        let mut s0 = 0.0;
        for (i, b) in self.buckets.iter().enumerate().take(self.buckets.len().saturating_sub(1)) {
            n0 += b.size;
            s0 += b.sum;
            let n1 = self.width - n0;
            if n0 < self.min_side || n1 < self.min_side {
                continue;
            }
            let diff = (s0 / n0 as f64 - (self.total - s0) / n1 as f64).abs();
            if diff > self.epsilon_cut(n0, n1) {
                return Some(i + 1);
            }
        }
        None
    }

    /// Adds a value in `[0, 1]`; returns true if the window shrank.
    pub fn update(&mut self, value: f64) -> bool {
        self.buckets.push_back(Bucket { sum: value, size: 1 });
        self.total += value;
        self.width += 1;
        self.compress();
        let mut drift = false;
        while let Some(cut) = self.find_cut() {
            for b in self.buckets.drain(..cut) {
                self.total -= b.sum;
                self.width -= b.size;
            }
            drift = true;
        }
        drift
    }
}

/// Hellinger distance `sqrt(1 - Σ sqrt(p_i q_i))` between two histograms
/// given as counts. Empty histograms are treated as identical.
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if sp <= 0.0 || sq <= 0.0 {
        return 0.0;
    }
    let half_sq: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| ((a / sp).sqrt() - (b / sq).sqrt()).powi(2))
        .sum::<f64>()
        / 2.0;
    half_sq.min(1.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HdddmConfig {
    pub batch_size: usize,
    /// Bins per feature; `None` means `floor(sqrt(batch_size))`.
    pub bins: Option<usize>,
    pub gamma: f64,
    /// Distance increments collected after a reset before a drift can fire.
    pub min_increments: usize,
}

impl Default for HdddmConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            bins: None,
            gamma: 1.0,
            min_increments: 2,
        }
    }
}

/// Hellinger Distance Drift Detection Method over batches of feature vectors.
#[derive(Clone, Debug)]
pub struct Hdddm {
    cfg: HdddmConfig,
    bins: usize,
    buffer: Vec<Vec<f64>>,
    /// Per-feature bin edges `(lo, width)` fixed when the reference is set.
    edges: Vec<(f64, f64)>,
    reference: Vec<Vec<f64>>,
    last_distance: Option<f64>,
    increments: Vec<f64>,
}

impl Hdddm {
    pub fn new(cfg: HdddmConfig) -> Result<Self> {
        if cfg.batch_size < 2 {
            return Err(Error::InvalidConfig("HDDDM batch size must be at least 2".into()));
        }
        if !(cfg.gamma >= 0.0) {
            return Err(Error::InvalidConfig("HDDDM sensitivity must be nonnegative".into()));
        }
        let bins = cfg
            .bins
            .unwrap_or_else(|| (cfg.batch_size as f64).sqrt().floor() as usize)
            .max(1);
        Ok(Self {
            cfg,
            bins,
            buffer: Vec::with_capacity(cfg.batch_size),
            edges: Vec::new(),
            reference: Vec::new(),
            last_distance: None,
            increments: Vec::new(),
        })
    }

    pub fn config(&self) -> HdddmConfig {
        self.cfg
    }

    /// Histogram distance of the last completed batch.
    pub fn last_distance(&self) -> Option<f64> {
        self.last_distance
    }

    fn histograms(&self, batch: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.edges
            .iter()
            .enumerate()
            .map(|(f, &(lo, width))| {
                let mut h = vec![0.0; self.bins];
                for x in batch {
                    let b = if width > 0.0 {
                        (((x[f] - lo) / width).floor().max(0.0) as usize).min(self.bins - 1)
                    } else {
                        0
                    };
                    h[b] += 1.0;
                }
                h
            })
            .collect()
    }

    fn set_reference(&mut self, batch: &[Vec<f64>]) {
        let d = batch[0].len();
        self.edges = (0..d)
            .map(|f| {
                let lo = batch.iter().map(|x| x[f]).fold(f64::INFINITY, f64::min);
                let hi = batch.iter().map(|x| x[f]).fold(f64::NEG_INFINITY, f64::max);
                (lo, (hi - lo) / self.bins as f64)
            })
            .collect();
        self.reference = self.histograms(batch);
        self.last_distance = None;
        self.increments.clear();
    }

    /// Mean per-feature Hellinger distance between `batch` and the reference.
    fn distance(&self, batch: &[Vec<f64>]) -> f64 {
        let current = self.histograms(batch);
        let total: f64 = self
            .reference
            .iter()
            .zip(&current)
            .map(|(r, c)| hellinger(r, c))
            .sum();
        total / current.len() as f64
    }

    /// Buffers `x`; evaluates a full batch. Returns true on drift.
    pub fn update(&mut self, x: &[f64]) -> bool {
        self.buffer.push(x.to_vec());
        if self.buffer.len() < self.cfg.batch_size {
            return false;
        }
        let batch = std::mem::take(&mut self.buffer);
        if self.reference.is_empty() {
            self.set_reference(&batch);
            return false;
        }
        let distance = self.distance(&batch);
        let mut drift = false;
        if let Some(prev) = self.last_distance {
            let eps = (distance - prev).abs();
            if self.increments.len() >= self.cfg.min_increments.max(2) {
                let k = self.increments.len() as f64;
                let mean = self.increments.iter().sum::<f64>() / k;
                let var = self.increments.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
                drift = eps > mean + self.cfg.gamma * var.sqrt();
            }
            if !drift {
                self.increments.push(eps);
            }
        }
        if drift {
            self.set_reference(&batch);
        } else {
            let counts = self.histograms(&batch);
            for (r, c) in self.reference.iter_mut().zip(counts) {
                for (a, b) in r.iter_mut().zip(c) {
                    *a += b;
                }
            }
            self.last_distance = Some(distance);
        }
        drift
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[default]
    None,
    Ddm,
    Adwin,
    Hdddm,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::None => "none",
            DetectorKind::Ddm => "ddm",
            DetectorKind::Adwin => "adwin",
            DetectorKind::Hdddm => "hdddm",
        }
    }

    /// Whether the detector consumes label-based errors.
    pub fn is_supervised(&self) -> bool {
        matches!(self, DetectorKind::Ddm | DetectorKind::Adwin)
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DetectorKind::None),
            "ddm" => Ok(DetectorKind::Ddm),
            "adwin" => Ok(DetectorKind::Adwin),
            "hdddm" => Ok(DetectorKind::Hdddm),
            _ => Err(Error::InvalidConfig(format!("unknown detector '{s}'"))),
        }
    }
}

/// One of the detectors behind a common interface.
#[derive(Clone, Debug)]
pub enum Detector {
    None,
    Ddm(Ddm),
    Adwin(Adwin),
    Hdddm(Hdddm),
}

impl Detector {
    pub fn new(kind: DetectorKind, hdddm: HdddmConfig) -> Result<Self> {
        Ok(match kind {
            DetectorKind::None => Detector::None,
            DetectorKind::Ddm => Detector::Ddm(Ddm::default()),
            DetectorKind::Adwin => Detector::Adwin(Adwin::default()),
            DetectorKind::Hdddm => Detector::Hdddm(Hdddm::new(hdddm)?),
        })
    }

    /// Feeds the error of a delivered label; no-op for unsupervised detectors.
    pub fn observe_error(&mut self, error: bool) -> bool {
        match self {
            Detector::Ddm(d) => d.update(error) == DdmSignal::Drift,
            Detector::Adwin(a) => a.update(if error { 1.0 } else { 0.0 }),
            _ => false,
        }
    }

    /// Feeds a raw sample; no-op for supervised detectors.
    pub fn observe_sample(&mut self, x: &[f64]) -> bool {
        match self {
            Detector::Hdddm(h) => h.update(x),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_for, RngStream};
    use rand::Rng;

    #[test]
    fn ddm_zero_errors_stable() {
        let mut d = Ddm::default();
        assert!((0..10_000).all(|_| d.update(false) == DdmSignal::Stable));
    }

    #[test]
    fn ddm_warmup_stable() {
        let mut d = Ddm::default();
        assert!((0..29).all(|i| d.update(i % 2 == 0) == DdmSignal::Stable));
    }

    #[test]
    fn ddm_detects_error_step() {
        // error rate 0.1 for 500 updates, then 0.6; count runs with a drift
        // among the next 100 updates
        let found = (0..50)
            .filter(|&seed| {
                let mut rng = rng_for(seed, RngStream::Strategy);
                let mut d = Ddm::default();
                for _ in 0..500 {
                    d.update(rng.random_bool(0.1));
                }
                (0..100).any(|_| d.update(rng.random_bool(0.6)) == DdmSignal::Drift)
            })
            .count();
        assert!(found >= 48, "{found}/50");
    }

    #[test]
    fn ddm_no_redetection_right_after_reset() {
        let mut d = Ddm::default();
        for _ in 0..200 {
            d.update(false);
        }
        let mut fired = false;
        for _ in 0..100 {
            if d.update(true) == DdmSignal::Drift {
                fired = true;
                break;
            }
        }
        assert!(fired);
        assert!((0..30).all(|_| d.update(true) == DdmSignal::Stable));
    }

    #[test]
    fn adwin_constant_never_fires() {
        for v in [0.0, 0.3, 1.0] {
            let mut a = Adwin::default();
            assert!((0..5000).all(|_| !a.update(v)));
            assert_eq!(a.width(), 5000);
        }
    }

    #[test]
    fn adwin_alternating_never_fires() {
        let mut a = Adwin::default();
        assert!((0..5000).all(|i| !a.update((i % 2) as f64)));
    }

    #[test]
    fn adwin_bucket_compression_bounds_memory() {
        let mut a = Adwin::default();
        for i in 0..10_000 {
            a.update(((i * 7) % 3) as f64 / 2.0);
        }
        assert!(a.buckets.len() <= 5 * 15);
        let sizes: u64 = a.buckets.iter().map(|b| b.size).sum();
        assert_eq!(sizes, a.width());
    }

    #[test]
    fn adwin_drops_old_window_on_shift() {
        let mut a = Adwin::default();
        for _ in 0..500 {
            a.update(0.0);
        }
        let mut fired_at = None;
        for i in 0..200 {
            if a.update(1.0) {
                fired_at = Some(i);
                break;
            }
        }
        assert!(fired_at.is_some());
        assert!(a.width() < 500);
    }

    #[test]
    fn hellinger_properties() {
        assert_eq!(hellinger(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 0.0);
        assert!((hellinger(&[1.0, 0.0], &[0.0, 3.0]) - 1.0).abs() < 1e-15);
        let a = [3.0, 1.0, 0.0, 2.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(hellinger(&a, &b), hellinger(&b, &a));
        assert!(hellinger(&a, &b) > 0.0 && hellinger(&a, &b) < 1.0);
    }

    #[test]
    fn hdddm_identical_batches_never_fire() {
        let mut h = Hdddm::new(HdddmConfig::default()).unwrap();
        let batch: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, (i % 10) as f64]).collect();
        for _ in 0..30 {
            for x in &batch {
                assert!(!h.update(x));
            }
        }
        assert_eq!(h.last_distance(), Some(0.0));
    }

    #[test]
    fn hdddm_disjoint_support_distance_one() {
        let mut h = Hdddm::new(HdddmConfig::default()).unwrap();
        let first: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        for x in &first {
            h.update(x);
        }
        let shifted: Vec<Vec<f64>> = (0..100).map(|_| vec![50.0]).collect();
        let d = h.distance(&shifted);
        // every value lands in the last bin, which the reference barely uses
        assert!(d > 0.6);
        let r = h.reference[0].clone();
        let mut disjoint = vec![0.0; r.len()];
        disjoint[r.len() - 1] = 5.0;
        let mut ref_without_last = r.clone();
        ref_without_last[r.len() - 1] = 0.0;
        assert!((hellinger(&ref_without_last, &disjoint) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn detector_dispatch_by_kind() {
        let mut d = Detector::new(DetectorKind::Hdddm, HdddmConfig::default()).unwrap();
        assert!(!d.observe_error(true));
        let mut d = Detector::new(DetectorKind::Ddm, HdddmConfig::default()).unwrap();
        assert!(!d.observe_sample(&[1.0]));
        assert!(DetectorKind::Adwin.is_supervised());
        assert!(!DetectorKind::Hdddm.is_supervised());
        assert!("nope".parse::<DetectorKind>().is_err());
    }
}
