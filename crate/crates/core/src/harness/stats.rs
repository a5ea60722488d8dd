//! Order statistics for settling-time summaries.

use serde::Serialize;

/// Quantile by linear interpolation between closest ranks, inclusive of the
/// extremes: position `q·(n−1)` in the sorted sample. `None` for an empty
/// sample.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Five-number summary plus the failure count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct FiveNumber {
    pub min_ts: Option<f64>,
    pub q1_ts: Option<f64>,
    pub median_ts: Option<f64>,
    pub q3_ts: Option<f64>,
    pub max_ts: Option<f64>,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        FiveNumber {
            min_ts: quantile(&sorted, 0.0),
            q1_ts: quantile(&sorted, 0.25),
            median_ts: quantile(&sorted, 0.5),
            q3_ts: quantile(&sorted, 0.75),
            max_ts: quantile(&sorted, 1.0),
        }
    }
}
