//! Small numeric helpers shared across modules.
//!
//! The empirical quantile convention lives here because three different
//! consumers (coverage fitting, coverage application, interval scoring) must
//! agree on it exactly; see [`quantile_sorted`].

use std::f64::consts::PI;

/// Empirical quantile as the order statistic nearest to the type-7 position.
///
/// `q(p) = sorted[floor((n-1)p + 1/2)]`, clamped to the valid index range.
///
/// Returning an actual sample (never an interpolated blend) is load-bearing:
/// the coverage optimizer moves tail samples and relies on quantiles at
/// already-calibrated levels being bitwise unchanged by later, more extreme
/// shells. Interpolating conventions mix a moved tail sample into interior
/// quantiles and drift earlier levels by several coverage quanta.
///
/// `sorted` must be ascending and non-empty; `p` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    let idx = ((n - 1) as f64 * p + 0.5).floor() as usize;
    sorted[idx.min(n - 1)]
}

/// Quantile of an unsorted slice. Sorts a copy; prefer [`quantile_sorted`]
/// when the caller already holds sorted data.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    quantile_sorted(&v, p)
}

pub fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by n, not n-1).
pub fn std_pop(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.max(0.0).sqrt()
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF via the error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}
