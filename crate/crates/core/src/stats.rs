//! Order statistics shared by the annotation and metrics modules.

use crate::error::{Error, Result};

/// Nearest-rank percentile: the value at 1-based rank `ceil(pct/100 * n)` of
/// the sorted data, with rank clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::invalid("percentile of an empty sample"));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::invalid(format!("percentile {pct} outside [0, 100]")));
    }
    let n = sorted.len();
    // The small slack keeps e.g. 0.95 * 20 from landing on rank 20 through rounding.
    let rank = ((pct / 100.0) * n as f64 - 1e-9).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Midpoint median: the average of the two central values for even counts.
pub fn midpoint_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty sample"));
    }
    let sorted = sorted_copy(values);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample (n-1) standard deviation; zero for a single value.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
