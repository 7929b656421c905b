//! Global bin-capacity selection.
//!
//! For a cap `k` the PRISM output size is `S(k) = Σ_b min(n_b, k)`, which is
//! non-decreasing and piecewise linear in `k` with breakpoints at the bin
//! sizes. [`solve_k`] finds the segment where `S` crosses the requested size
//! in `O(|B| log |B|)` and picks the closer of the two neighboring integers.
//! [`brute_force_k`] is the scan used to check it.

use thiserror::Error;

use crate::model::BinCounts;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SolveError {
    #[error("no color bins to solve over")]
    EmptyCounts,
    #[error("target ratio {0} outside (0, 1]")]
    InvalidRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSolution {
    pub k_star: u64,
    /// `S(k_star)`.
    pub predicted_size: u64,
    /// `S(k_star) / N`.
    pub predicted_ratio: f64,
    /// Index `j` of the linear segment `S(k) = c_j + (|B| - j) k` holding the
    /// real-valued crossing.
    pub segment: usize,
    /// Set when even `k = 1` keeps more than the requested size, i.e. the
    /// number of distinct bins alone exceeds the target.
    pub above_target_at_min: bool,
}

/// `Σ_b min(n_b, k)`.
pub fn output_size(counts: &BinCounts, k: u64) -> u64 {
    counts.sizes().map(|n| n.min(k)).sum()
}

fn check(counts: &BinCounts, ratio: f64) -> Result<(), SolveError> {
    if counts.is_empty() {
        return Err(SolveError::EmptyCounts);
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(SolveError::InvalidRatio(ratio));
    }
    Ok(())
}

/// Sorted bin sizes with prefix sums, for O(log |B|) evaluation of `S`.
struct SortedSizes {
    sizes: Vec<u64>,
    // prefix[j] = n_1 + ... + n_j, prefix[0] = 0
    prefix: Vec<u64>,
}

impl SortedSizes {
    fn new(counts: &BinCounts) -> Self {
        let mut sizes: Vec<u64> = counts.sizes().collect();
        sizes.sort_unstable();
        let mut prefix = Vec::with_capacity(sizes.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &n in &sizes {
            acc += n;
            prefix.push(acc);
        }
        Self { sizes, prefix }
    }

    fn bins(&self) -> usize {
        self.sizes.len()
    }

    fn eval(&self, k: u64) -> u64 {
        let full = self.sizes.partition_point(|&n| n <= k);
        self.prefix[full] + (self.bins() - full) as u64 * k
    }
}

/// Finds the integer cap whose output size is closest to `ratio * N`, ties
/// toward the smaller cap, never below 1.
pub fn solve_k(counts: &BinCounts, ratio: f64) -> Result<KSolution, SolveError> {
    check(counts, ratio)?;
    let sorted = SortedSizes::new(counts);
    let bins = sorted.bins();
    let total = counts.total();
    let target = ratio * total as f64;

    // Segment j covers k in [n_j, n_{j+1}] (1-based sizes, n_0 = 0), where
    // S(k) = c_j + (|B| - j) k. Compare in the multiplied-out form so the
    // bracket test involves no division.
    let lower = |j: usize| if j == 0 { 0 } else { sorted.sizes[j - 1] };
    let segment = (0..bins)
        .find(|&j| {
            let remaining = (bins - j) as f64;
            let rhs = target - sorted.prefix[j] as f64;
            lower(j) as f64 * remaining <= rhs && rhs <= sorted.sizes[j] as f64 * remaining
        })
        // target == N lands on the last segment; anything past it is float
        // noise above N.
        .unwrap_or(bins - 1);

    let k_real = (target - sorted.prefix[segment] as f64) / (bins - segment) as f64;
    let floor = (k_real.floor().max(1.0)) as u64;
    let ceil = (k_real.ceil().max(1.0)) as u64;
    let distance = |k: u64| (sorted.eval(k) as f64 - target).abs();
    let k_star = if distance(ceil) < distance(floor) {
        ceil
    } else {
        floor
    };
    let predicted_size = sorted.eval(k_star);

    Ok(KSolution {
        k_star,
        predicted_size,
        predicted_ratio: predicted_size as f64 / total as f64,
        segment,
        above_target_at_min: bins as f64 > target,
    })
}

/// Scans `k = 1..=max n_b` for the cap minimizing `|S(k) - ratio * N|`,
/// smaller `k` on ties.
///
/// The scan stops at the first `k` with `S(k) >= ratio * N`: `S` is
/// non-decreasing, so no later `k` can be strictly closer and ties keep the
/// earlier one. The result equals the full scan.
pub fn brute_force_k(counts: &BinCounts, ratio: f64) -> Result<u64, SolveError> {
    check(counts, ratio)?;
    let sizes: Vec<u64> = counts.sizes().collect();
    let target = ratio * counts.total() as f64;
    let max = counts.max_count();
    let mut best = (1, f64::INFINITY);
    for k in 1..=max {
        let s: u64 = sizes.iter().map(|&n| n.min(k)).sum();
        let d = (s as f64 - target).abs();
        if d < best.1 {
            best = (k, d);
        }
        if s as f64 >= target {
            break;
        }
    }
    Ok(best.0)
}
