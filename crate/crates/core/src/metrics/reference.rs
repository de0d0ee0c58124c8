//! Brute-force index definitions, written straight from the textbook
//! formulas with no sorting or shared helpers.
//!
//! These are the oracles the fast paths in [`super`] are checked against,
//! and the source of the synthetic generator's expected values. Keep them
//! independent of the production code.

/// `ΣΣ |x_i − x_j| / (2 n² μ)` over all ordered pairs.
pub fn gini_pairwise(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n < 2 || total <= 0.0 {
        return None;
    }
    let mut diff = 0.0;
    for &a in values {
        for &b in values {
            diff += (a - b).abs();
        }
    }
    let mean = total / n as f64;
    Some(diff / (2.0 * (n * n) as f64 * mean))
}

/// Nearest-rank percentile found by counting: the smallest observed value
/// `v` with at least `p%` of the units at or below it.
pub fn percentile_by_counting(values: &[f64], percent: f64) -> Option<f64> {
    let n = values.len() as f64;
    values
        .iter()
        .copied()
        .filter(|&v| {
            let at_or_below = values.iter().filter(|&&x| x <= v).count() as f64;
            at_or_below * 100.0 >= percent * n
        })
        .min_by(f64::total_cmp)
}

pub fn percentile_ratio_by_counting(values: &[f64], hi: f64, lo: f64) -> Option<f64> {
    let low = percentile_by_counting(values, lo)?;
    if low <= 0.0 {
        return None;
    }
    Some(percentile_by_counting(values, hi)? / low)
}

/// `½ Σ |x_i / Σx − 1/n|`.
pub fn hoover_direct(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n < 2 || total <= 0.0 {
        return None;
    }
    let half_sum: f64 = values
        .iter()
        .map(|x| (x / total - 1.0 / n as f64).abs())
        .sum();
    Some(half_sum / 2.0)
}

/// `(1/n) Σ (x_i/μ) ln(x_i/μ)`, zero terms skipped.
pub fn theil_direct(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n < 2 || total <= 0.0 {
        return None;
    }
    let mean = total / n as f64;
    let s: f64 = values
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|x| (x / mean) * (x / mean).ln())
        .sum();
    Some(s / n as f64)
}

/// `−Σ p ln p / ln k` over the `k` nonzero categories.
pub fn relative_entropy_direct(counts: &[f64]) -> Option<f64> {
    let total: f64 = counts.iter().sum();
    let k = counts.iter().filter(|&&c| c > 0.0).count();
    match k {
        0 => None,
        1 => Some(0.0),
        _ => {
            let h: f64 = counts
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|c| -(c / total) * (c / total).ln())
                .sum();
            Some(h / (k as f64).ln())
        }
    }
}
