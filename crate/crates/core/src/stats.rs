//! Wilcoxon rank-sum (Mann–Whitney U) test and trajectory comparison.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::trajectory::{Quantity, Trajectory};

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_MAX_TOTAL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankSumMethod {
    ExactEnumeration,
    NormalApproximation,
}

impl std::fmt::Display for RankSumMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RankSumMethod::ExactEnumeration => "exact",
            RankSumMethod::NormalApproximation => "normal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumResult {
    /// U statistic of the first sample.
    pub u_statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
/// Also returns the tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of ways to pick `n1` of the ranks `1..=n` for each attainable U,
/// indexed by U (0 ..= n1·(n − n1)).
pub fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    let n = n1 + n2;
    let max_sum = n1 * (2 * n - n1 + 1) / 2;
    // ways[k][s]: subsets of size k with rank sum s, over ranks seen so far
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for rank in 1..=n {
        for k in (1..=n1.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                let add = ways[k - 1][s - rank];
                if add != 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    let min_sum = n1 * (n1 + 1) / 2;
    ways[n1][min_sum..=max_sum].to_vec()
}

fn exact_p(u: f64, n1: usize, n2: usize) -> f64 {
    let counts = exact_u_counts(n1, n2);
    let total: f64 = counts.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = counts[..=u].iter().sum();
    let upper: f64 = counts[u..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let mean = n1f * n2f / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = if n > 1.0 {
        n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided rank-sum test. Uses exact enumeration when the samples are
/// small (n1 + n2 ≤ 20) and tie-free, otherwise the tie- and
/// continuity-corrected normal approximation.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<RankSumResult> {
    rank_sum(x, y, None)
}

/// [`wilcoxon_rank_sum`] with the method forced. Exact enumeration rejects tied samples.
pub fn wilcoxon_rank_sum_with(x: &[f64], y: &[f64], method: RankSumMethod) -> Result<RankSumResult> {
    rank_sum(x, y, Some(method))
}

fn rank_sum(x: &[f64], y: &[f64], forced: Option<RankSumMethod>) -> Result<RankSumResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("rank-sum test needs two non-empty samples"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("rank-sum samples contain NaN"));
    }
    let (n1, n2) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    let method = forced.unwrap_or(if n1 + n2 <= EXACT_MAX_TOTAL && ties.is_empty() {
        RankSumMethod::ExactEnumeration
    } else {
        RankSumMethod::NormalApproximation
    });
    let p_value = match method {
        RankSumMethod::ExactEnumeration => {
            if !ties.is_empty() {
                return Err(Error::invalid("exact enumeration requires tie-free samples"));
            }
            exact_p(u, n1, n2)
        }
        RankSumMethod::NormalApproximation => normal_p(u, n1, n2, &ties),
    };
    Ok(RankSumResult {
        u_statistic: u,
        p_value,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub quantity: Quantity,
    pub rank_sum: RankSumResult,
    /// Root-mean-square pointwise difference over every recorded sample.
    pub rms: f64,
    /// Largest absolute pointwise difference.
    pub max_abs: f64,
}

/// Rank-sum test on annual samples of one quantity, plus pointwise error summaries.
pub fn compare_trajectories(a: &Trajectory, b: &Trajectory, quantity: Quantity) -> Result<Comparison> {
    if !a.same_grid(b) {
        return Err(Error::invalid("trajectories are on different time grids"));
    }
    let rank_sum = wilcoxon_rank_sum(&a.annual_series(quantity), &b.annual_series(quantity))?;
    let (sa, sb) = (a.series(quantity), b.series(quantity));
    let (mut sq, mut max_abs) = (0.0, 0.0f64);
    for (x, y) in sa.iter().zip(&sb) {
        let d = x - y;
        sq += d * d;
        max_abs = max_abs.max(d.abs());
    }
    Ok(Comparison {
        quantity,
        rank_sum,
        rms: (sq / sa.len() as f64).sqrt(),
        max_abs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
    /// Standard error of the mean.
    pub se: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(Summary { mean, sd, se: sd / n.sqrt() })
}

/// Per-sample spread of one quantity across replicate trajectories.
pub fn replicate_summary(trajectories: &[Trajectory], quantity: Quantity) -> Result<Vec<Summary>> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::invalid("no replicates to summarize"))?;
    if trajectories.iter().any(|t| !t.same_grid(first)) {
        return Err(Error::invalid("replicates are on different time grids"));
    }
    let series: Vec<Vec<f64>> = trajectories.iter().map(|t| t.series(quantity)).collect();
    (0..first.len())
        .map(|i| summarize(&series.iter().map(|s| s[i]).collect::<Vec<_>>()))
        .collect()
}
