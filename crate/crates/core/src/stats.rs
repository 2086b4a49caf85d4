//! Rank statistics for comparing methods across seeds.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample of size {0} is too small (need at least 2)")]
    SampleTooSmall(usize),
    #[error("need at least 2 methods and 2 seeds, got {methods} x {seeds}")]
    MatrixTooSmall { methods: usize, seeds: usize },
    #[error("method {method} has {got} seeds, expected {expected}")]
    Ragged {
        method: usize,
        got: usize,
        expected: usize,
    },
    #[error("no critical value tabulated for {0} methods")]
    UntabulatedMethods(usize),
    #[error("NaN in sample")]
    NaN,
}

/// Ranks starting at 1 in ascending order; ties share their average rank.
/// Also returns the tie term `sum(t^3 - t)` over tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
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
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Kruskal-Wallis test of two samples with tie correction, referred to a
/// chi-square distribution with one degree of freedom.
///
/// Fitness values of inactive agents are expected as `f64::NEG_INFINITY`.
pub fn kruskal_wallis_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::SampleTooSmall(s.len()));
        }
        if s.iter().any(|v| v.is_nan()) {
            return Err(StatsError::NaN);
        }
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = average_ranks(&pooled);
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(1.0);
    }
    let (ra, rb) = ranks.split_at(a.len());
    let term = |r: &[f64]| r.iter().sum::<f64>().powi(2) / r.len() as f64;
    let h = (12.0 / (n * (n + 1.0)) * (term(ra) + term(rb)) - 3.0 * (n + 1.0)) / correction;
    let chi2 = ChiSquared::new(1.0).expect("one degree of freedom");
    let p = chi2.sf(h.max(0.0));
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Studentized range statistic divided by sqrt(2) at alpha = 0.05, for 2 to
/// 10 methods.
const NEMENYI_Q05: [f64; 9] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];

pub fn nemenyi_q(methods: usize) -> Result<f64, StatsError> {
    methods
        .checked_sub(2)
        .and_then(|i| NEMENYI_Q05.get(i))
        .copied()
        .ok_or(StatsError::UntabulatedMethods(methods))
}

pub fn critical_difference(methods: usize, seeds: usize) -> Result<f64, StatsError> {
    let k = methods as f64;
    Ok(nemenyi_q(methods)? * (k * (k + 1.0) / (6.0 * seeds as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    /// Mean rank per method, in input order; 1 is best.
    pub mean_ranks: Vec<f64>,
    pub critical_difference: f64,
    /// Method indices ordered from best to worst mean rank.
    pub order: Vec<usize>,
    /// Maximal runs of `order` whose mean ranks lie within the critical
    /// difference of each other.
    pub groups: Vec<Vec<usize>>,
}

/// Ranks methods per seed (higher fitness is better) and averages.
/// `fitness[m][s]` is method `m` on seed `s`.
pub fn mean_ranks(fitness: &[Vec<f64>]) -> Result<RankSummary, StatsError> {
    let methods = fitness.len();
    let seeds = fitness.first().map_or(0, Vec::len);
    if methods < 2 || seeds < 2 {
        return Err(StatsError::MatrixTooSmall { methods, seeds });
    }
    for (method, row) in fitness.iter().enumerate() {
        if row.len() != seeds {
            return Err(StatsError::Ragged {
                method,
                got: row.len(),
                expected: seeds,
            });
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(StatsError::NaN);
        }
    }
    let cd = critical_difference(methods, seeds)?;
    let mut totals = vec![0.0; methods];
    for s in 0..seeds {
        let negated: Vec<f64> = fitness.iter().map(|row| -row[s]).collect();
        let (ranks, _) = average_ranks(&negated);
        for (t, r) in totals.iter_mut().zip(ranks) {
            *t += r;
        }
    }
    let mean_ranks: Vec<f64> = totals.into_iter().map(|t| t / seeds as f64).collect();
    let mut order: Vec<usize> = (0..methods).collect();
    order.sort_by(|&a, &b| mean_ranks[a].total_cmp(&mean_ranks[b]).then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last_end = 0;
    for start in 0..methods {
        let mut end = start + 1;
        while end < methods && mean_ranks[order[end]] - mean_ranks[order[start]] < cd {
            end += 1;
        }
        if end - start >= 2 && end > last_end {
            groups.push(order[start..end].to_vec());
            last_end = end;
        }
    }
    Ok(RankSummary {
        mean_ranks,
        critical_difference: cd,
        order,
        groups,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Five-number summary using linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    };
    Some(Quartiles {
        min: sorted[0],
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
        max: sorted[sorted.len() - 1],
    })
}
