//! Scoring: CRPS (empirical and Gaussian closed form), central-interval
//! coverage, and mean-collapsed point errors.
//!
//! Ensemble shapes follow the pipeline convention: truths are `(B, M, d)`
//! (window, horizon step, variate) and ensembles are `(B, S, M, d)` with `S`
//! samples per cell. All scores average over cells.

use crate::stats::{normal_cdf, normal_pdf, quantile_sorted};
use ndarray::{s, Array3, Array4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Coverage levels entering [`picp_distance`].
pub const PICP_GAMMAS: [f64; 3] = [0.5, 0.8, 0.95];

/// CRPS of an empirical ensemble against a scalar outcome.
///
/// Energy form `E|X - y| - E|X - X'| / 2` evaluated exactly from the order
/// statistics. Cost is one sort.
pub fn crps_empirical(samples: &[f64], y: f64) -> f64 {
    assert!(!samples.is_empty(), "CRPS of an empty ensemble");
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ensemble value"));
    crps_empirical_sorted(&x, y)
}

/// [`crps_empirical`] on an already ascending slice.
pub fn crps_empirical_sorted(sorted: &[f64], y: f64) -> f64 {
    let s = sorted.len();
    // Point mass: CRPS equals absolute error exactly. Taking the identity
    // directly keeps it exact in floating point too, where summing S copies
    // of |c - y| and dividing by S need not return |c - y|.
    if sorted[s - 1] == sorted[0] {
        return (sorted[0] - y).abs();
    }
    let term1 = sorted.iter().map(|x| (x - y).abs()).sum::<f64>() / s as f64;
    // Mean absolute pairwise difference from adjacent gaps: the gap between
    // order statistics g and g+1 separates g*(S-g) ordered pairs. All terms
    // are nonnegative, so ties cost nothing and nothing cancels.
    let mut gapsum = 0.0;
    for g in 1..s {
        gapsum += (g * (s - g)) as f64 * (sorted[g] - sorted[g - 1]);
    }
    term1 - gapsum / (s as f64 * s as f64)
}

/// Closed-form CRPS of a Gaussian forecast `N(mu, sigma^2)`.
///
/// `sigma * (z * (2 * Phi(z) - 1) + 2 * phi(z) - 1 / sqrt(pi))` with
/// `z = (y - mu) / sigma`; degenerates to `|y - mu|` at `sigma == 0`.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> f64 {
    assert!(sigma >= 0.0, "negative sigma");
    if sigma == 0.0 {
        return (y - mu).abs();
    }
    let z = (y - mu) / sigma;
    sigma * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - 1.0 / PI.sqrt())
}

/// Fraction of cells whose outcome falls inside the closed central interval
/// `[q((1-gamma)/2), q((1+gamma)/2)]` of the cell's ensemble.
pub fn picp(gamma: f64, y: &Array3<f64>, ens: &Array4<f64>) -> f64 {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    check_shapes(y, ens);
    let (b, _, m, d) = ens.dim();
    let mut hits = 0usize;
    let mut cell: Vec<f64> = Vec::with_capacity(ens.dim().1);
    for w in 0..b {
        for t in 0..m {
            for j in 0..d {
                cell.clear();
                cell.extend(ens.slice(s![w, .., t, j]).iter());
                cell.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ensemble value"));
                let lo = quantile_sorted(&cell, (1.0 - gamma) / 2.0);
                let hi = quantile_sorted(&cell, (1.0 + gamma) / 2.0);
                let truth = y[[w, t, j]];
                if truth >= lo && truth <= hi {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / (b * m * d) as f64
}

/// Sum of coverage gaps `|PICP(gamma) - gamma|` over [`PICP_GAMMAS`].
pub fn picp_distance(y: &Array3<f64>, ens: &Array4<f64>) -> f64 {
    PICP_GAMMAS
        .iter()
        .map(|&g| (picp(g, y, ens) - g).abs())
        .sum()
}

/// MAE and MSE of the ensemble collapsed to its per-cell mean.
pub fn point_metrics(y: &Array3<f64>, ens: &Array4<f64>) -> (f64, f64) {
    check_shapes(y, ens);
    let (b, s_n, m, d) = ens.dim();
    let mut mae = 0.0;
    let mut mse = 0.0;
    for w in 0..b {
        for t in 0..m {
            for j in 0..d {
                let mean = ens.slice(s![w, .., t, j]).sum() / s_n as f64;
                let e = mean - y[[w, t, j]];
                mae += e.abs();
                mse += e * e;
            }
        }
    }
    let cells = (b * m * d) as f64;
    (mae / cells, mse / cells)
}

/// Mean per-cell empirical CRPS.
pub fn crps_mean(y: &Array3<f64>, ens: &Array4<f64>) -> f64 {
    check_shapes(y, ens);
    let (b, _, m, d) = ens.dim();
    let mut total = 0.0;
    for w in 0..b {
        for t in 0..m {
            for j in 0..d {
                let cell: Vec<f64> = ens.slice(s![w, .., t, j]).iter().copied().collect();
                total += crps_empirical(&cell, y[[w, t, j]]);
            }
        }
    }
    total / (b * m * d) as f64
}

fn check_shapes(y: &Array3<f64>, ens: &Array4<f64>) {
    let (b, _, m, d) = ens.dim();
    assert_eq!(y.dim(), (b, m, d), "truth and ensemble shapes disagree");
    assert!(b * m * d > 0, "empty evaluation set");
}

/// Coverage at one level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicpEntry {
    pub gamma: f64,
    pub value: f64,
}

/// Scores for one horizon step, averaged over windows and variates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub step: usize,
    pub crps: f64,
    pub mae: f64,
    pub mse: f64,
}

/// Full evaluation summary for one forecast ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub crps: f64,
    pub mae: f64,
    pub mse: f64,
    pub picp: Vec<PicpEntry>,
    pub picp_distance: f64,
    pub per_horizon: Vec<HorizonMetrics>,
}

/// Every score in one pass over the ensemble.
pub fn compute_report(y: &Array3<f64>, ens: &Array4<f64>) -> MetricReport {
    check_shapes(y, ens);
    let m = ens.dim().2;
    let picp_entries: Vec<PicpEntry> = PICP_GAMMAS
        .iter()
        .map(|&gamma| PicpEntry {
            gamma,
            value: picp(gamma, y, ens),
        })
        .collect();
    let pd = picp_entries.iter().map(|e| (e.value - e.gamma).abs()).sum();
    let mut per_horizon = Vec::with_capacity(m);
    for t in 0..m {
        let yt = y.slice(s![.., t..t + 1, ..]).to_owned();
        let et = ens.slice(s![.., .., t..t + 1, ..]).to_owned();
        let (mae, mse) = point_metrics(&yt, &et);
        per_horizon.push(HorizonMetrics {
            step: t + 1,
            crps: crps_mean(&yt, &et),
            mae,
            mse,
        });
    }
    let (mae, mse) = point_metrics(y, ens);
    MetricReport {
        crps: crps_mean(y, ens),
        mae,
        mse,
        picp: picp_entries,
        picp_distance: pd,
        per_horizon,
    }
}

#[cfg(test)]
// Reference values keep their full frozen digit strings.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::{Array3, Array4};
    use proptest::prelude::*;

    // Reference values computed with 50-digit arithmetic.
    #[test]
    fn crps_empirical_reference_values() {
        assert_abs_diff_eq!(crps_empirical(&[0.0, 2.0], 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(crps_empirical(&[1.5], 0.25), 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(
            crps_empirical(&[-1.0, 0.0, 1.0, 2.0, 5.0], 0.7),
            0.54,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            crps_empirical(&[0.3, -0.2, 1.1, 0.0, -2.5, 0.9, 0.4], -0.35),
            0.41734693877551019,
            max_relative = 1e-14
        );
    }

    #[test]
    fn crps_gaussian_reference_values() {
        assert_relative_eq!(
            crps_gaussian(0.0, 1.0, 0.0),
            0.23369497725510907,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            crps_gaussian(0.0, 1.0, 1.0),
            0.60244135762761631,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            crps_gaussian(0.3, 1.7, -0.5),
            0.54476000979762208,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            crps_gaussian(2.0, 0.25, 2.1),
            0.074172022586787443,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            crps_gaussian(-1.0, 3.0, 4.0),
            3.4263905593850762,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            crps_gaussian(0.0, 1.2011224087864498, 1.0),
            0.5949040335669752,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            crps_gaussian(0.0, 1.5, 1.0),
            0.60707456615157637,
            max_relative = 1e-14
        );
    }

    #[test]
    fn crps_gaussian_zero_sigma_is_absolute_error() {
        assert_eq!(crps_gaussian(2.0, 0.0, 3.5), 1.5);
        assert_eq!(crps_gaussian(-1.0, 0.0, -1.0), 0.0);
    }

    #[test]
    fn crps_point_mass_is_exact_absolute_error() {
        let cases = [
            (3.0, 1.0, 7),
            (0.1, -0.7, 3),
            (-2.5, 4.0, 10),
            (1e-3, 1e-3, 5),
        ];
        for (c, y, s) in cases {
            let ens = vec![c; s];
            let got = crps_empirical(&ens, y);
            let want: f64 = (c - y).abs();
            assert_eq!(got.to_bits(), want.to_bits());
        }
    }

    fn crps_naive(samples: &[f64], y: f64) -> f64 {
        let s = samples.len() as f64;
        let t1 = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / s;
        let mut t2 = 0.0;
        for a in samples {
            for b in samples {
                t2 += (a - b).abs();
            }
        }
        t1 - t2 / (2.0 * s * s)
    }

    #[test]
    fn picp_counts_closed_interval() {
        // Two windows, one horizon step, one variate, S = 5. Quantile ranks
        // for gamma = 0.5: positions 0.25 / 0.75 -> indices 1 and 3.
        let ens = Array4::from_shape_vec(
            (2, 5, 1, 1),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
        )
        .unwrap();
        let inside = Array3::from_shape_vec((2, 1, 1), vec![2.0, 45.0]).unwrap();
        assert_eq!(picp(0.5, &inside, &ens), 0.5); // 2.0 in [2,4]; 45 outside [20,40]
        let boundary = Array3::from_shape_vec((2, 1, 1), vec![4.0, 20.0]).unwrap();
        assert_eq!(picp(0.5, &boundary, &ens), 1.0); // closed interval includes both ends
    }

    #[test]
    fn picp_distance_sums_three_levels() {
        let ens = Array4::from_shape_vec((1, 3, 1, 1), vec![0.0, 1.0, 2.0]).unwrap();
        let y = Array3::from_shape_vec((1, 1, 1), vec![1.0]).unwrap();
        // Truth inside every interval: PICP = 1 at all levels.
        let want = (1.0 - 0.5) + (1.0 - 0.8) + (1.0 - 0.95);
        assert_abs_diff_eq!(picp_distance(&y, &ens), want, epsilon = 1e-12);
    }

    #[test]
    fn point_metrics_collapse_to_mean() {
        let ens = Array4::from_shape_vec((1, 2, 2, 1), vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let y = Array3::from_shape_vec((1, 2, 1), vec![1.0, 5.0]).unwrap();
        // Cell means: 2.0 and 4.0; errors 1.0 and -1.0.
        let (mae, mse) = point_metrics(&y, &ens);
        assert_abs_diff_eq!(mae, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mse, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn report_per_horizon_rows_cover_all_steps() {
        let ens = Array4::from_shape_vec((1, 2, 3, 1), (0..3).flat_map(|_| [0.0, 1.0]).collect())
            .unwrap();
        let y = Array3::from_shape_vec((1, 3, 1), vec![0.5, 0.5, 2.0]).unwrap();
        let rep = compute_report(&y, &ens);
        assert_eq!(rep.per_horizon.len(), 3);
        assert_eq!(rep.per_horizon[0].step, 1);
        assert_eq!(rep.picp.len(), 3);
        let mean_h: f64 = rep.per_horizon.iter().map(|h| h.crps).sum::<f64>() / 3.0;
        assert_abs_diff_eq!(rep.crps, mean_h, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn crps_sorted_identity_matches_naive(
            samples in proptest::collection::vec(-50.0f64..50.0, 1..60),
            y in -60.0f64..60.0,
        ) {
            let fast = crps_empirical(&samples, y);
            let slow = crps_naive(&samples, y);
            prop_assert!((fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()));
        }

        #[test]
        fn crps_nonnegative(
            samples in proptest::collection::vec(-5.0f64..5.0, 1..40),
            y in -6.0f64..6.0,
        ) {
            prop_assert!(crps_empirical(&samples, y) >= -1e-12);
        }

        #[test]
        fn picp_monotone_in_gamma(
            vals in proptest::collection::vec(-10.0f64..10.0, 24),
            y0 in -12.0f64..12.0,
        ) {
            let ens = Array4::from_shape_vec((1, 24, 1, 1), vals).unwrap();
            let y = Array3::from_shape_vec((1, 1, 1), vec![y0]).unwrap();
            let mut prev = 0.0;
            for gamma in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
                let p = picp(gamma, &y, &ens);
                prop_assert!(p >= prev);
                prev = p;
            }
        }
    }
}
