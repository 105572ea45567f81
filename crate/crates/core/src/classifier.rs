//! Parzen window classifier over the labelled part of the window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::window::Class;

/// Bandwidth scale applied to the mean pairwise distance of the
/// initialization samples.
pub const BANDWIDTH_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwcConfig {
    pub bandwidth: f64,
    pub n_classes: usize,
}

/// Default bandwidth: half the mean pairwise Euclidean distance of `points`.
/// Falls back to 1 for fewer than two distinct points.
pub fn default_bandwidth<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let pts: Vec<&[f64]> = points.into_iter().collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            total += sq_dist(pts[i], pts[j]).sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 || total <= 0.0 {
        return 1.0;
    }
    BANDWIDTH_SCALE * total / pairs as f64
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Gaussian-kernel class posterior `p(c|x) ∝ Σ_{y_i=c} exp(-|x-x_i|² / 2σ²)`.
#[derive(Clone, Debug)]
pub struct Pwc {
    cfg: PwcConfig,
    dim: Option<usize>,
    points: Vec<f64>,
    labels: Vec<Class>,
}

impl Pwc {
    pub fn new(cfg: PwcConfig) -> Result<Self> {
        if !(cfg.bandwidth > 0.0) || !cfg.bandwidth.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                cfg.bandwidth
            )));
        }
        if cfg.n_classes == 0 {
            return Err(Error::InvalidConfig("classifier needs at least one class".into()));
        }
        Ok(Self {
            cfg,
            dim: None,
            points: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn fit<'a>(cfg: PwcConfig, data: impl IntoIterator<Item = (&'a [f64], Class)>) -> Result<Self> {
        let mut model = Self::new(cfg)?;
        for (x, y) in data {
            model.add(x, y)?;
        }
        Ok(model)
    }

    pub fn add(&mut self, x: &[f64], y: Class) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                })
            }
            None => self.dim = Some(x.len()),
            _ => {}
        }
        if y >= self.cfg.n_classes {
            return Err(Error::InvalidConfig(format!(
                "label {y} out of range for {} classes",
                self.cfg.n_classes
            )));
        }
        self.points.extend_from_slice(x);
        self.labels.push(y);
        Ok(())
    }

    pub fn config(&self) -> PwcConfig {
        self.cfg
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    fn sq_dists<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (f64, Class)> + 'a {
        let d = x.len().max(1);
        self.points
            .chunks_exact(d)
            .zip(&self.labels)
            .map(move |(p, &y)| (sq_dist(p, x), y))
    }

    /// Per-class kernel sums (unnormalized frequency estimates).
    pub fn kernel_sums(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let scale = 2.0 * self.cfg.bandwidth * self.cfg.bandwidth;
        let mut sums = vec![0.0; self.cfg.n_classes];
        for (d2, y) in self.sq_dists(x) {
            sums[y] += (-d2 / scale).exp();
        }
        Ok(sums)
    }

    /// Class posterior at `x`. Uniform when the model is empty.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let c = self.cfg.n_classes;
        if self.is_empty() {
            return Ok(vec![1.0 / c as f64; c]);
        }
        // The posterior is a ratio of kernel sums, so shifting every exponent
        // by the nearest distance leaves it unchanged and avoids underflow.
        let scale = 2.0 * self.cfg.bandwidth * self.cfg.bandwidth;
        let nearest = self.sq_dists(x).map(|(d2, _)| d2).fold(f64::INFINITY, f64::min);
        let mut sums = vec![0.0; c];
        for (d2, y) in self.sq_dists(x) {
            sums[y] += (-(d2 - nearest) / scale).exp();
        }
        let total: f64 = sums.iter().sum();
        for s in sums.iter_mut() {
            *s /= total;
        }
        Ok(sums)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Class> {
        Ok(argmax(&self.posterior(x)?))
    }

    /// Largest posterior component, in `[1/C, 1]`.
    pub fn confidence(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior(x)?.into_iter().fold(0.0, f64::max))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> Class {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate().skip(1) {
        if p > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(n_classes: usize) -> PwcConfig {
        PwcConfig {
            bandwidth: 1.0,
            n_classes,
        }
    }

    #[test]
    fn single_point_owns_posterior() {
        let m = Pwc::fit(cfg(2), [(&[0.0, 0.0][..], 0)]).unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0], [100.0, 100.0]] {
            assert_eq!(m.posterior(&x).unwrap(), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn equidistant_is_even() {
        let m = Pwc::fit(cfg(2), [(&[-1.0][..], 0), (&[1.0][..], 1)]).unwrap();
        let p = m.posterior(&[0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn three_point_hand_evaluation() {
        // Kernel values 1, e^-2, e^-2 with sigma=1 need squared distances 0, 4, 4.
        let m = Pwc::fit(
            cfg(2),
            [(&[0.0, 0.0][..], 0), (&[2.0, 0.0][..], 1), (&[0.0, -2.0][..], 1)],
        )
        .unwrap();
        let p = m.posterior(&[0.0, 0.0]).unwrap();
        let expected = 1.0 / (1.0 + 2.0 * (-2.0f64).exp());
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((expected - 0.787).abs() < 1e-3);
        assert!((m.confidence(&[0.0, 0.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn predict_and_confidence() {
        let m = Pwc::fit(cfg(2), [(&[0.0][..], 0), (&[3.0][..], 1)]).unwrap();
        let p = m.posterior(&[0.5]).unwrap();
        assert!(p[0] > 0.9);
        assert_eq!(m.predict(&[0.5]).unwrap(), 0);
        assert_eq!(argmax(&[0.9, 0.1]), 0);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn empty_model_is_uniform() {
        let m = Pwc::new(cfg(4)).unwrap();
        assert_eq!(m.posterior(&[1.0, 2.0]).unwrap(), vec![0.25; 4]);
        assert_eq!(m.predict(&[1.0, 2.0]).unwrap(), 0);
        assert_eq!(m.confidence(&[1.0]).unwrap(), 0.25);
    }

    #[test]
    fn dimension_mismatch() {
        let m = Pwc::fit(cfg(2), [(&[0.0, 0.0][..], 0)]).unwrap();
        assert!(matches!(
            m.posterior(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(Pwc::new(PwcConfig { bandwidth: 0.0, n_classes: 2 }).is_err());
    }

    #[test]
    fn default_bandwidth_is_half_mean_distance() {
        let pts = [[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]];
        // distances 5, 10, 5
        let bw = default_bandwidth(pts.iter().map(|p| &p[..]));
        assert!((bw - 0.5 * 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(default_bandwidth(std::iter::empty()), 1.0);
    }

    fn training_set() -> impl Strategy<Value = Vec<(Vec<f64>, Class)>> {
        prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 2), 0usize..3), 1..30)
    }

    proptest! {
        #[test]
        fn posterior_is_a_distribution(data in training_set(), x in prop::collection::vec(-50.0f64..50.0, 2), bw in 0.05f64..3.0) {
            let m = Pwc::fit(PwcConfig { bandwidth: bw, n_classes: 3 }, data.iter().map(|(x, y)| (x.as_slice(), *y))).unwrap();
            let p = m.posterior(&x).unwrap();
            prop_assert!(p.iter().all(|v| *v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn duplicate_point_never_lowers_own_class(data in training_set(), pick in 0usize..30) {
            let (x, y) = data[pick % data.len()].clone();
            let cfg = PwcConfig { bandwidth: 0.7, n_classes: 3 };
            let m = Pwc::fit(cfg, data.iter().map(|(x, y)| (x.as_slice(), *y))).unwrap();
            let before = m.posterior(&x).unwrap()[y];
            let mut m2 = m.clone();
            m2.add(&x, y).unwrap();
            prop_assert!(m2.posterior(&x).unwrap()[y] >= before - 1e-12);
        }

        #[test]
        fn posterior_matches_raw_kernel_ratio(data in training_set(), x in prop::collection::vec(-5.0f64..5.0, 2)) {
            let m = Pwc::fit(PwcConfig { bandwidth: 2.0, n_classes: 3 }, data.iter().map(|(x, y)| (x.as_slice(), *y))).unwrap();
            let sums = m.kernel_sums(&x).unwrap();
            let total: f64 = sums.iter().sum();
            let p = m.posterior(&x).unwrap();
            for c in 0..3 {
                prop_assert!((p[c] - sums[c] / total).abs() < 1e-9);
            }
            prop_assert_eq!(m.predict(&x).unwrap(), argmax(&sums));
        }
    }
}
