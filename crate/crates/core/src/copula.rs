//! Grouped mutual-information estimation via the empirical-copula transform.
//!
//! Two steps: map every column to its empirical ranks `u_i = (1/n) * #{j :
//! x_j <= x_i}`, then estimate the entropy of the rank points with a k-NN
//! estimator (Chebyshev norm). The negated copula entropy is the total
//! correlation of the columns; differences of total correlations give the
//! mutual information between one variable and a group.
//!
//! All entropies and MI values are in nats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};

/// Rank-transformed sample: one coordinate column per source column, values
/// in (0, 1]. Invariant under strictly increasing transforms of the source.
#[derive(Debug, Clone)]
pub struct CopulaSample {
    coords: Vec<Vec<f64>>,
    n: usize,
}

impl CopulaSample {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    /// Row-major copy of the points.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.coords.iter().map(|c| c[i]).collect())
            .collect()
    }
}

/// Coordinate-wise empirical rank transform `u_i = (1/n) * #{j : x_j <= x_i}`.
///
/// Ties share the maximal rank, exactly as the indicator sum prescribes.
pub fn empirical_copula(columns: &[&[f64]]) -> Result<CopulaSample> {
    if columns.is_empty() {
        return Err(Error::InvalidInput("empty column set".into()));
    }
    let n = columns[0].len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {n}")));
    }
    let mut coords = Vec::with_capacity(columns.len());
    for col in columns {
        if col.len() != n {
            return Err(Error::LengthMismatch { left: n, right: col.len() });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in copula input".into()));
        }
        let mut sorted = col.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let inv_n = 1.0 / n as f64;
        coords.push(
            col.iter()
                .map(|&x| sorted.partition_point(|&s| s <= x) as f64 * inv_n)
                .collect(),
        );
    }
    Ok(CopulaSample { coords, n })
}

/// k-NN (Kozachenko-Leonenko) entropy estimate in nats:
/// `H = -digamma(k) + digamma(n) + (d/n) * sum_i ln(2 * eps_i)`
/// with `eps_i` the Chebyshev distance from point `i` to its k-th nearest
/// neighbor, excluding the point itself.
///
/// Exact brute-force neighbor search; the per-point k-th distances are
/// accumulated in sorted order so the result does not depend on row order
/// or thread count.
pub fn knn_entropy(points: &[Vec<f64>], k: usize) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 points, got {n}")));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidInput("ragged or zero-dimensional points".into()));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidInput(format!(
            "k must satisfy 1 <= k <= n-1, got k={k}, n={n}"
        )));
    }

    let eps: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map_init(
            || Vec::with_capacity(n - 1),
            |dist, (i, pi)| {
                dist.clear();
                for (j, pj) in points.iter().enumerate() {
                    if j != i {
                        dist.push(chebyshev(pi, pj));
                    }
                }
                let (_, kth, _) = dist.select_nth_unstable_by(k - 1, f64::total_cmp);
                *kth
            },
        )
        .collect();

    if let Some(i) = eps.iter().position(|&e| e == 0.0) {
        let j = points
            .iter()
            .enumerate()
            .position(|(j, pj)| j != i && chebyshev(&points[i], pj) == 0.0)
            .unwrap_or(i);
        return Err(Error::DegenerateGeometry { first: i.min(j), second: i.max(j) });
    }

    let mut logs: Vec<f64> = eps.iter().map(|&e| (2.0 * e).ln()).collect();
    logs.sort_unstable_by(f64::total_cmp);
    let sum: f64 = logs.iter().sum();
    Ok(-digamma(k as f64) + digamma(n as f64) + sum * d as f64 / n as f64)
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn has_duplicate_rows(rows: &[Vec<f64>]) -> bool {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.windows(2).any(|w| rows[w[0]] == rows[w[1]])
}

// Ties in every coordinate produce coincident rank points, which the k-NN
// estimator cannot handle (log of zero distance). A deterministic jitter of
// magnitude 1e-10 -- far below the 1/n rank resolution -- separates them.
fn jitter_rows(rows: &mut [Vec<f64>], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            *v += (rng.random::<f64>() - 0.5) * 2.0e-10;
        }
    }
}

fn copula_entropy(columns: &[&[f64]], k: usize, seed: u64) -> Result<f64> {
    let sample = empirical_copula(columns)?;
    let mut rows = sample.rows();
    if has_duplicate_rows(&rows) {
        jitter_rows(&mut rows, seed);
    }
    knn_entropy(&rows, k)
}

/// Total correlation of `d >= 2` columns: the negated entropy of their
/// empirical copula. For two columns this is the bivariate copula MI.
pub fn total_correlation(columns: &[&[f64]], k: usize, seed: u64) -> Result<f64> {
    if columns.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "total correlation needs at least 2 columns, got {}",
            columns.len()
        )));
    }
    Ok(-copula_entropy(columns, k, seed)?)
}

/// Estimator knobs shared by every MI query in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiOptions {
    /// Neighbor count for the entropy estimator.
    pub k: usize,
    /// Clamp negative raw estimates to zero.
    pub clamp_negative: bool,
    /// Seed for the tie-resolution jitter.
    pub seed: u64,
}

impl Default for MiOptions {
    fn default() -> Self {
        Self { k: 3, clamp_negative: true, seed: 0 }
    }
}

/// A grouped mutual-information value with its component entropy terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    /// Reported value: `max(0, raw)` under clamping, `raw` otherwise.
    pub value: f64,
    /// Pre-clamp estimate.
    pub raw: f64,
    /// Copula entropy of the joint block.
    pub joint_entropy: f64,
    /// Copula entropy of the group block (zero for a single column).
    pub marginal_group_entropy: f64,
    /// Whether clamping changed the value.
    pub clamped: bool,
}

impl MiEstimate {
    fn from_entropies(joint: f64, group: f64, clamp: bool) -> Self {
        let raw = group - joint;
        let clamped = clamp && raw < 0.0;
        Self {
            value: if clamped { 0.0 } else { raw },
            raw,
            joint_entropy: joint,
            marginal_group_entropy: group,
            clamped,
        }
    }
}

/// Mutual information `I(a; group)` estimated as
/// `TC([a | group]) - TC(group)` (the second term vanishing for a single
/// group column). Exact for true distributions because the marginal copula
/// entropy of `a` alone is zero.
pub fn grouped_mi(a: &[f64], group: &[&[f64]], opts: &MiOptions) -> Result<MiEstimate> {
    if group.is_empty() {
        return Err(Error::InvalidInput("grouped MI needs at least one group column".into()));
    }
    if let Some(g) = group.iter().find(|g| g.len() != a.len()) {
        return Err(Error::LengthMismatch { left: a.len(), right: g.len() });
    }
    let mut joint: Vec<&[f64]> = Vec::with_capacity(group.len() + 1);
    joint.push(a);
    joint.extend_from_slice(group);
    let h_joint = copula_entropy(&joint, opts.k, opts.seed)?;
    let h_group = if group.len() >= 2 {
        copula_entropy(group, opts.k, opts.seed)?
    } else {
        0.0
    };
    Ok(MiEstimate::from_entropies(h_joint, h_group, opts.clamp_negative))
}

/// Mutual information between two column blocks:
/// `I(X; Y) = TC(X u Y) - TC(X) - TC(Y)`, single-column blocks contributing
/// zero total correlation.
pub fn block_mi(x: &[&[f64]], y: &[&[f64]], opts: &MiOptions) -> Result<MiEstimate> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput("block MI needs non-empty blocks".into()));
    }
    let joint: Vec<&[f64]> = x.iter().chain(y.iter()).copied().collect();
    let h_joint = copula_entropy(&joint, opts.k, opts.seed)?;
    let mut h_blocks = 0.0;
    for block in [x, y] {
        if block.len() >= 2 {
            h_blocks += copula_entropy(block, opts.k, opts.seed)?;
        }
    }
    Ok(MiEstimate::from_entropies(h_joint, h_blocks, opts.clamp_negative))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sorted_distinct_values_map_to_ranks() {
        let c = empirical_copula(&[&[10.0, 20.0, 30.0]]).unwrap();
        assert_eq!(c.coords()[0], vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn ties_share_the_maximal_rank() {
        let c = empirical_copula(&[&[5.0, 5.0, 7.0]]).unwrap();
        assert_eq!(c.coords()[0], vec![2.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn rank_invariance_under_strictly_increasing_map() {
        let col: [f64; 5] = [0.4, -1.3, 2.6, 0.0, 1.1];
        let mapped: Vec<f64> = col.iter().map(|v| f64::exp(*v)).collect();
        let a = empirical_copula(&[&col]).unwrap();
        let b = empirical_copula(&[&mapped]).unwrap();
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn knn_entropy_matches_hand_computation() {
        // Points 0, 1, 3 on the line with k = 1: eps = (1, 1, 2), so
        // H = -digamma(1) + digamma(3) + (ln 2 + ln 2 + ln 4) / 3
        //   = 1.5 + (4 ln 2) / 3.
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        let h = knn_entropy(&pts, 1).unwrap();
        assert_relative_eq!(h, 1.5 + 4.0 * (2.0f64).ln() / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn k_equal_to_n_is_rejected() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert!(knn_entropy(&pts, 3).is_err());
        assert!(knn_entropy(&pts, 0).is_err());
    }

    #[test]
    fn duplicate_points_are_degenerate() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(
            knn_entropy(&pts, 1).unwrap_err(),
            Error::DegenerateGeometry { first: 0, second: 1 }
        );
    }

    #[test]
    fn tied_columns_are_resolved_by_jitter() {
        // Both columns tie on rows 0 and 1, so the rank points coincide.
        let a = [1.0, 1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 5.0, 1.0, 2.0, 0.0];
        let est = total_correlation(&[&a, &b], 2, 0).unwrap();
        assert!(est.is_finite());
    }

    #[test]
    fn single_group_column_reduces_to_bivariate() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 13 + 7) % 50) as f64).collect();
        let mi = grouped_mi(&a, &[&b], &MiOptions::default()).unwrap();
        let tc = total_correlation(&[&a, &b], 3, 0).unwrap();
        assert_eq!(mi.raw, tc);
        assert_eq!(mi.marginal_group_entropy, 0.0);
    }

    #[test]
    fn clamping_is_recorded() {
        let e = MiEstimate::from_entropies(0.5, 0.2, true);
        assert!(e.clamped);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.raw, -0.3);
        let e = MiEstimate::from_entropies(0.5, 0.2, false);
        assert!(!e.clamped);
        assert_eq!(e.value, e.raw);
    }
}
