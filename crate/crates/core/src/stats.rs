//! Population-divisor moments shared by every module.
//!
//! All variances in this crate divide by the number of observations (not n - 1);
//! the within/between split of the total is an exact identity only under that convention.

/// Arithmetic mean and population variance. Returns `None` for an empty slice.
pub fn population_moments(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance; 0 for an empty slice.
pub(crate) fn pop_variance(xs: &[f64]) -> f64 {
    population_moments(xs).map_or(0.0, |(_, v)| v)
}

/// Variance with divisor n - 1; `None` when fewer than two observations.
pub(crate) fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Population covariance of two equal-length slices.
pub(crate) fn pop_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.len() as f64
}

/// Fourth central moment (population form).
pub(crate) fn fourth_central_moment(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64
}
