//! Small numeric helpers shared by the analytics stages.
//!
//! Standard deviations are sample deviations (n - 1 denominator) everywhere.

/// Mean and sample standard deviation. A single value has deviation 0;
/// an empty slice yields `(0, 0)`.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    mean_std(xs).0
}

/// Sum in a canonical (sorted) order so the result does not depend on the
/// order in which the values were collected.
pub fn canonical_sum(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}
