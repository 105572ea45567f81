//! Nonparametric comparison statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest smaller-sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 8;

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MannWhitney {
    /// `min(U_a, U_b)`.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Two-sided Mann–Whitney U test.
///
/// When the smaller sample has at most [`EXACT_MAX_N`] values the p-value is
/// the exact permutation probability of a rank-sum at least as far from its
/// mean as the observed one (ties included). Otherwise the normal
/// approximation with tie and continuity corrections is used.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSample("Mann-Whitney needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidSample("Mann-Whitney inputs must be finite".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let ua = ra - (na * (na + 1)) as f64 / 2.0;
    let ub = (na * nb) as f64 - ua;
    let u = ua.min(ub);

    if na.min(nb) <= EXACT_MAX_N {
        let p = exact_p(&ranks, na);
        return Ok(MannWhitney { u, p, exact: true });
    }

    let n = (na + nb) as f64;
    let mean = (na * nb) as f64 / 2.0;
    let tie_term: f64 = tie_groups(&pooled).iter().map(|&t| t * t * t - t).sum();
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0, exact: false });
    }
    let z = ((ua - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * (1.0 - normal.cdf(z))).min(1.0);
    Ok(MannWhitney { u, p, exact: false })
}

fn tie_groups(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        groups.push((j - i + 1) as f64);
        i = j + 1;
    }
    groups
}

/// Exact two-sided p-value of the rank sum of the first `na` of `ranks`.
///
/// Doubled midranks are integers, so the null distribution of the doubled
/// rank sum over all `C(N, na)` splits is counted by dynamic programming.
fn exact_p(ranks: &[f64], na: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=na).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let observed: usize = doubled[..na].iter().sum();
    let n = ranks.len();
    // doubled expected rank sum is na(N+1), an integer
    let centre = (na * (n + 1)) as i64;
    let dev = (observed as i64 - centre).abs();
    let total: f64 = ways[na].iter().sum();
    let extreme: f64 = ways[na]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i64 - centre).abs() >= dev)
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}

/// Two-tailed Nemenyi critical values `q_0.05` for 2..=20 algorithms.
const NEMENYI_Q05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];

pub fn nemenyi_q05(k: usize) -> Result<f64> {
    if !(2..=20).contains(&k) {
        return Err(Error::InvalidSample(format!(
            "Nemenyi critical values are tabulated for 2 to 20 algorithms, got {k}"
        )));
    }
    Ok(NEMENYI_Q05[k - 2])
}

/// Nemenyi critical difference of mean ranks at α = 0.05.
pub fn critical_difference(k: usize, n_datasets: usize) -> Result<f64> {
    Ok(nemenyi_q05(k)? * ((k * (k + 1)) as f64 / (6.0 * n_datasets as f64)).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Friedman {
    pub chi2: f64,
    pub p: f64,
    /// Mean rank per algorithm; rank 1 is the best (highest) score.
    pub mean_ranks: Vec<f64>,
    pub critical_difference: f64,
}

/// Friedman test over `scores[algorithm][dataset]` (higher is better)
/// followed by the Nemenyi critical difference.
pub fn friedman_nemenyi(scores: &[Vec<f64>]) -> Result<Friedman> {
    let k = scores.len();
    if k < 2 {
        return Err(Error::InvalidSample("Friedman test needs at least two algorithms".into()));
    }
    let n = scores[0].len();
    if n < 2 {
        return Err(Error::InvalidSample("Friedman test needs at least two datasets".into()));
    }
    if scores.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidSample("score matrix rows differ in length".into()));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSample("scores must be finite".into()));
    }
    let mut rank_sums = vec![0.0; k];
    for j in 0..n {
        // negate so that the best score gets rank 1
        let column: Vec<f64> = scores.iter().map(|row| -row[j]).collect();
        for (sum, r) in rank_sums.iter_mut().zip(midranks(&column)) {
            *sum += r;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / n as f64).collect();
    let kf = k as f64;
    let nf = n as f64;
    let chi2 = 12.0 * nf / (kf * (kf + 1.0))
        * (mean_ranks.iter().map(|r| r * r).sum::<f64>() - kf * (kf + 1.0).powi(2) / 4.0);
    let chi2 = chi2.max(0.0);
    let dist = ChiSquared::new(kf - 1.0).expect("k >= 2");
    let p = 1.0 - dist.cdf(chi2);
    Ok(Friedman {
        chi2,
        p,
        mean_ranks,
        critical_difference: critical_difference(k, n)?,
    })
}
