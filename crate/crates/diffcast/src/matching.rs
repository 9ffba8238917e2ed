//! Post-hoc distribution matching for residual ensembles.
//!
//! Two transforms run after sampling, both in residual space:
//!
//! * error-aware expansion: rescales each cell's ensemble around its mean so
//!   the spread hits the CRPS-optimal value `alpha * E|r| / sqrt(ln 2)`
//!   implied by the cell's own mean absolute sample;
//! * coverage optimization: a ladder of quantile shells fitted on a
//!   calibration split; shell `i` moves samples outside the central
//!   `gamma[i]` interval away from (or toward) the interval edges by a
//!   multiplier chosen so the pooled coverage at `gamma[i+1]` matches its
//!   nominal level.
//!
//! Both leave already-matched structure alone: expansion preserves cell
//! means; a shell leaves every sample inside its pivot interval bitwise
//! untouched, and because quantiles are order statistics (see
//! [`crate::stats::quantile_sorted`]) the levels fitted by earlier shells
//! stay exactly calibrated.

use crate::error::{Error, Result};
use crate::stats::{mean, quantile_sorted, std_pop};
use ndarray::{s, Array2, Array3, Array4};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Spread floor protecting the expansion ratio against degenerate cells.
const STD_FLOOR: f64 = 1e-9;

/// Bisection bracket and iteration cap for shell multipliers.
const LAMBDA_LO: f64 = 1e-3;
const LAMBDA_HI: f64 = 100.0;
const MAX_BISECT: usize = 60;
/// Early-exit tolerance on pooled coverage error.
const COVERAGE_TOL: f64 = 1e-3;

/// Spread minimizing the CRPS of a Gaussian forecast with a known absolute
/// error: `|y - mu| / sqrt(ln 2)`.
pub fn optimal_sigma(y: f64, mu: f64) -> f64 {
    (y - mu).abs() / LN_2.sqrt()
}

/// Per-cell expansion multipliers: `alpha * mean|r| / (sqrt(ln 2) * std(r))`,
/// with the standard deviation floored at 1e-9.
pub fn eae_lambda(res: &Array3<f64>, alpha: f64) -> Array2<f64> {
    let (s_n, m, d) = res.dim();
    assert!(s_n >= 2, "expansion needs at least two samples per cell");
    assert!(alpha > 0.0, "alpha must be positive");
    let mut lam = Array2::zeros((m, d));
    let mut cell: Vec<f64> = Vec::with_capacity(s_n);
    for t in 0..m {
        for j in 0..d {
            cell.clear();
            cell.extend(res.slice(s![.., t, j]).iter());
            let mabs = cell.iter().map(|v| v.abs()).sum::<f64>() / s_n as f64;
            let target = alpha * mabs / LN_2.sqrt();
            lam[[t, j]] = target / std_pop(&cell).max(STD_FLOOR);
        }
    }
    lam
}

/// Expand each cell around its mean to the spread implied by [`eae_lambda`].
/// Cell means are preserved; a zero-spread cell stays a point mass.
pub fn eae_expand(res: &Array3<f64>, alpha: f64) -> Array3<f64> {
    let lam = eae_lambda(res, alpha);
    let (s_n, m, d) = res.dim();
    let mut out = res.clone();
    for t in 0..m {
        for j in 0..d {
            let col: Vec<f64> = res.slice(s![.., t, j]).iter().copied().collect();
            let mu = mean(&col);
            let l = lam[[t, j]];
            for s_i in 0..s_n {
                out[[s_i, t, j]] = mu + l * (res[[s_i, t, j]] - mu);
            }
        }
    }
    out
}

/// Fitted coverage ladder. `gamma` holds the full ladder including the base
/// level at index 0; shell `i` pivots on `gamma[i]`, targets `gamma[i + 1]`
/// and scales tails by `lambda[i]`. Unattainable targets leave a warning and
/// a clamped multiplier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub warnings: Vec<String>,
}

fn validate_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.len() < 2 {
        return Err(Error::Config(
            "coverage ladder needs at least two levels".into(),
        ));
    }
    if gammas[0] < 0.0 || *gammas.last().unwrap() >= 1.0 {
        return Err(Error::Config("coverage levels must lie in [0, 1)".into()));
    }
    for w in gammas.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "coverage levels must increase strictly, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Tail transform of one value given the pivot interval `[q_lo, q_hi]`.
/// Interior values pass through untouched.
fn shell_map(v: f64, q_lo: f64, q_hi: f64, lambda: f64) -> f64 {
    if v < q_lo {
        q_lo - lambda * (q_lo - v)
    } else if v > q_hi {
        q_hi + lambda * (v - q_hi)
    } else {
        v
    }
}

/// Rank of the order statistic at probability `p` (same convention as
/// [`quantile_sorted`]).
fn rank_of(p: f64, s_n: usize) -> usize {
    (((s_n - 1) as f64 * p + 0.5).floor() as usize).min(s_n - 1)
}

/// Fit the coverage ladder on a calibration set. `truths` is `(B, M, d)`,
/// `ens` the matching residual ensembles `(B, S, M, d)`; coverage pools all
/// cells. `gammas` is the full ladder including the base level.
pub fn co_fit(
    truths: &Array3<f64>,
    ens: &Array4<f64>,
    gammas: &[f64],
) -> Result<CalibrationProfile> {
    validate_gammas(gammas)?;
    let (b, s_n, m, d) = ens.dim();
    assert_eq!(
        truths.dim(),
        (b, m, d),
        "truth and ensemble shapes disagree"
    );
    if s_n < 2 {
        return Err(Error::Data(
            "coverage fitting needs at least two samples per cell".into(),
        ));
    }
    let cells = b * m * d;
    if cells == 0 {
        return Err(Error::Data(
            "coverage fitting needs at least one cell".into(),
        ));
    }
    let mut warnings = Vec::new();
    if cells < 100 {
        warnings.push(format!(
            "calibration pools only {cells} cells; fitted coverage is quantized to 1/{cells}"
        ));
    }

    // Sorted working copy of every cell. Shell transforms are monotone, so
    // rows stay sorted as shells accumulate.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cells);
    let mut y: Vec<f64> = Vec::with_capacity(cells);
    for w in 0..b {
        for t in 0..m {
            for j in 0..d {
                let mut row: Vec<f64> = ens.slice(s![w, .., t, j]).iter().copied().collect();
                row.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ensemble value"));
                rows.push(row);
                y.push(truths[[w, t, j]]);
            }
        }
    }

    let mut lambda = Vec::with_capacity(gammas.len() - 1);
    for shell in 0..gammas.len() - 1 {
        let pivot = gammas[shell];
        let target = gammas[shell + 1];
        let r_lo = rank_of((1.0 - target) / 2.0, s_n);
        let r_hi = rank_of((1.0 + target) / 2.0, s_n);
        // Per cell: pivot interval plus the order statistics that become the
        // target interval. Ranks survive the transform, so coverage under a
        // trial multiplier needs only these four numbers.
        let per_cell: Vec<(f64, f64, f64, f64)> = rows
            .iter()
            .map(|row| {
                let q_lo = quantile_sorted(row, (1.0 - pivot) / 2.0);
                let q_hi = quantile_sorted(row, (1.0 + pivot) / 2.0);
                (q_lo, q_hi, row[r_lo], row[r_hi])
            })
            .collect();
        let picp_at = |lam: f64| -> f64 {
            let mut hits = 0usize;
            for (i, &(q_lo, q_hi, x_lo, x_hi)) in per_cell.iter().enumerate() {
                let lo = shell_map(x_lo, q_lo, q_hi, lam);
                let hi = shell_map(x_hi, q_lo, q_hi, lam);
                if y[i] >= lo && y[i] <= hi {
                    hits += 1;
                }
            }
            hits as f64 / cells as f64
        };

        let mut lo = LAMBDA_LO;
        let mut hi = LAMBDA_HI;
        let e_lo = picp_at(lo) - target;
        let e_hi = picp_at(hi) - target;
        // Coverage grows with the multiplier. When even the bracket ends
        // cannot straddle the target, clamp to the saturated end; otherwise
        // bisect, remembering the best multiplier seen in case the discrete
        // coverage steps over the tolerance band.
        let (err, lam) = if e_hi <= 0.0 {
            (-e_hi, hi)
        } else if e_lo >= 0.0 {
            (e_lo, lo)
        } else {
            let mut best = if -e_lo <= e_hi {
                (-e_lo, lo)
            } else {
                (e_hi, hi)
            };
            for _ in 0..MAX_BISECT {
                if best.0 <= COVERAGE_TOL {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let e = picp_at(mid) - target;
                if e.abs() < best.0 {
                    best = (e.abs(), mid);
                }
                if e < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best
        };
        // A residual error above both the tolerance and two coverage quanta
        // means the target is genuinely out of reach inside the bracket.
        if err > COVERAGE_TOL.max(2.0 / cells as f64) {
            warnings.push(format!(
                "coverage target {target:.4} unattained at shell {shell}: \
                 best |PICP - target| = {err:.6} with multiplier {lam:.6}"
            ));
        }
        for (row, &(q_lo, q_hi, _, _)) in rows.iter_mut().zip(&per_cell) {
            for v in row.iter_mut() {
                *v = shell_map(*v, q_lo, q_hi, lam);
            }
        }
        lambda.push(lam);
    }
    Ok(CalibrationProfile {
        gamma: gammas.to_vec(),
        lambda,
        warnings,
    })
}

/// Replay a fitted ladder on one window's residual ensemble `(S, M, d)`.
/// Samples keep their positions (a sample is transformed in place), so joint
/// paths across cells stay aligned.
pub fn co_apply(res: &Array3<f64>, profile: &CalibrationProfile) -> Array3<f64> {
    assert_eq!(
        profile.lambda.len() + 1,
        profile.gamma.len(),
        "profile ladder and multipliers disagree"
    );
    let (s_n, m, d) = res.dim();
    let mut out = res.clone();
    let mut sorted: Vec<f64> = Vec::with_capacity(s_n);
    for t in 0..m {
        for j in 0..d {
            for (shell, &lam) in profile.lambda.iter().enumerate() {
                let pivot = profile.gamma[shell];
                sorted.clear();
                sorted.extend(out.slice(s![.., t, j]).iter());
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ensemble value"));
                let q_lo = quantile_sorted(&sorted, (1.0 - pivot) / 2.0);
                let q_hi = quantile_sorted(&sorted, (1.0 + pivot) / 2.0);
                for s_i in 0..s_n {
                    out[[s_i, t, j]] = shell_map(out[[s_i, t, j]], q_lo, q_hi, lam);
                }
            }
        }
    }
    out
}

/// Final forecast assembly: prediction plus the matched residual ensemble,
/// expanded around its per-cell mean by `lambda`. With unit multipliers this
/// reduces to `y_hat + res` per sample.
pub fn finalize(y_hat: &Array2<f64>, res: &Array3<f64>, lambda: &Array2<f64>) -> Array3<f64> {
    let (s_n, m, d) = res.dim();
    assert_eq!(y_hat.dim(), (m, d));
    assert_eq!(lambda.dim(), (m, d));
    let mut out = Array3::zeros((s_n, m, d));
    let mut cell = Vec::with_capacity(s_n);
    for t in 0..m {
        for j in 0..d {
            cell.clear();
            cell.extend(res.slice(s![.., t, j]).iter());
            let mu = mean(&cell);
            let l = lambda[[t, j]];
            for s_i in 0..s_n {
                out[[s_i, t, j]] = y_hat[[t, j]] + mu + l * (res[[s_i, t, j]] - mu);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::picp;
    use crate::rng::{stream_rng, StreamId};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::{Array3, Array4};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn optimal_sigma_ratio_reference_value() {
        assert_relative_eq!(
            optimal_sigma(1.0, 0.0),
            1.2011224087864498,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            optimal_sigma(0.0, -2.0),
            2.0 * 1.2011224087864498,
            max_relative = 1e-15
        );
        assert_eq!(optimal_sigma(0.7, 0.7), 0.0);
    }

    #[test]
    fn expansion_matches_two_sample_reference() {
        // Cell {-3, 3}: mean 0, spread 3, mean abs 3 -> multiplier 1/sqrt(ln 2).
        let res = Array3::from_shape_vec((2, 1, 1), vec![-3.0, 3.0]).unwrap();
        let lam = eae_lambda(&res, 1.0);
        assert_relative_eq!(lam[[0, 0]], 1.2011224087864498, max_relative = 1e-14);
        let out = eae_expand(&res, 1.0);
        assert_relative_eq!(out[[0, 0, 0]], -3.6033672263593495, max_relative = 1e-14);
        assert_relative_eq!(out[[1, 0, 0]], 3.6033672263593495, max_relative = 1e-14);
    }

    #[test]
    fn expansion_preserves_cell_means_and_hits_target_spread() {
        let mut rng = stream_rng(31, StreamId::Validation);
        let res = Array3::from_shape_fn((40, 3, 2), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.5 + 0.4 * z
        });
        let alpha = 0.9;
        let out = eae_expand(&res, alpha);
        for t in 0..3 {
            for j in 0..2 {
                let before: Vec<f64> = res.slice(s![.., t, j]).iter().copied().collect();
                let after: Vec<f64> = out.slice(s![.., t, j]).iter().copied().collect();
                assert_abs_diff_eq!(mean(&after), mean(&before), epsilon = 1e-12);
                let mabs = before.iter().map(|v| v.abs()).sum::<f64>() / before.len() as f64;
                let target = alpha * mabs / LN_2.sqrt();
                assert_relative_eq!(std_pop(&after), target, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_spread_cell_stays_point_mass() {
        let res = Array3::from_elem((5, 1, 1), 2.5);
        let out = eae_expand(&res, 1.0);
        for v in out.iter() {
            assert_eq!(*v, 2.5);
        }
    }

    #[test]
    fn shell_doubles_tails_around_median_pivot() {
        // Pivot level 0 collapses the interval to the median; multiplier 2
        // then doubles every deviation from it.
        let res = Array3::from_shape_vec((5, 1, 1), vec![-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let profile = CalibrationProfile {
            gamma: vec![0.0, 0.8],
            lambda: vec![2.0],
            warnings: vec![],
        };
        let out = co_apply(&res, &profile);
        let got: Vec<f64> = out.slice(s![.., 0, 0]).iter().copied().collect();
        assert_eq!(got, vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
    }

    #[test]
    fn shells_leave_pivot_interior_untouched() {
        let mut rng = stream_rng(77, StreamId::Validation);
        let res = Array3::from_shape_fn((51, 1, 1), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let profile = CalibrationProfile {
            gamma: vec![0.5, 0.9],
            lambda: vec![3.0],
            warnings: vec![],
        };
        let out = co_apply(&res, &profile);
        let mut sorted: Vec<f64> = res.slice(s![.., 0, 0]).iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q_lo = quantile_sorted(&sorted, 0.25);
        let q_hi = quantile_sorted(&sorted, 0.75);
        for (a, b) in res.iter().zip(out.iter()) {
            if *a >= q_lo && *a <= q_hi {
                assert_eq!(a.to_bits(), b.to_bits(), "interior sample moved");
            } else {
                assert_ne!(a.to_bits(), b.to_bits(), "tail sample did not move");
            }
        }
    }

    /// Underdispersed synthetic calibration problem shared by a few tests.
    fn underdispersed(bw: usize, s_n: usize, seed: u64) -> (Array3<f64>, Array4<f64>) {
        let mut rng = stream_rng(seed, StreamId::Validation);
        let mut truths = Array3::zeros((bw, 1, 1));
        let mut ens = Array4::zeros((bw, s_n, 1, 1));
        for w in 0..bw {
            let t: f64 = StandardNormal.sample(&mut rng);
            truths[[w, 0, 0]] = t;
            for s_i in 0..s_n {
                let z: f64 = StandardNormal.sample(&mut rng);
                ens[[w, s_i, 0, 0]] = 0.5 * z;
            }
        }
        (truths, ens)
    }

    #[test]
    fn fitted_shells_hit_their_coverage_targets() {
        let (truths, ens) = underdispersed(800, 60, 5);
        let gammas = [0.0, 0.3, 0.6, 0.9];
        let profile = co_fit(&truths, &ens, &gammas).unwrap();
        assert_eq!(profile.lambda.len(), 3);
        assert!(
            profile.warnings.is_empty(),
            "unexpected warnings: {:?}",
            profile.warnings
        );
        // Replay through the public application path and check pooled
        // coverage with the scoring module's own estimator.
        let (b, s_n, m, d) = ens.dim();
        let mut applied = Array4::zeros((b, s_n, m, d));
        for w in 0..b {
            let win = ens.slice(s![w, .., .., ..]).to_owned();
            applied
                .slice_mut(s![w, .., .., ..])
                .assign(&co_apply(&win, &profile));
        }
        for &g in &gammas[1..] {
            let got = picp(g, &truths, &applied);
            assert!(
                (got - g).abs() <= 2.5 / b as f64,
                "coverage at {g}: got {got}"
            );
        }
    }

    #[test]
    fn unattainable_target_clamps_and_warns() {
        // Truths sit far outside anything a 100x tail stretch can reach.
        let (mut truths, ens) = underdispersed(200, 30, 9);
        truths.mapv_inplace(|_| 1e6);
        let profile = co_fit(&truths, &ens, &[0.0, 0.5]).unwrap();
        assert!(!profile.warnings.is_empty());
        assert_eq!(profile.lambda[0], LAMBDA_HI);
    }

    #[test]
    fn gamma_ladder_validation() {
        let (truths, ens) = underdispersed(50, 10, 2);
        assert!(co_fit(&truths, &ens, &[0.5]).is_err());
        assert!(co_fit(&truths, &ens, &[0.0, 0.5, 0.5]).is_err());
        assert!(co_fit(&truths, &ens, &[0.0, 1.0]).is_err());
        assert!(co_fit(&truths, &ens, &[-0.1, 0.5]).is_err());
    }

    #[test]
    fn small_pool_records_warning() {
        let (truths, ens) = underdispersed(20, 10, 4);
        let profile = co_fit(&truths, &ens, &[0.0, 0.5]).unwrap();
        assert!(profile.warnings.iter().any(|w| w.contains("20 cells")));
    }

    #[test]
    fn later_shells_preserve_earlier_levels_exactly() {
        let (truths, ens) = underdispersed(600, 50, 13);
        let gammas = [0.0, 0.25, 0.5, 0.75];
        let profile = co_fit(&truths, &ens, &gammas).unwrap();
        let win = ens.slice(s![0, .., .., ..]).to_owned();
        // Apply the first shell only, then the full ladder; quantiles at the
        // first target level must agree bit for bit.
        let first = CalibrationProfile {
            gamma: vec![0.0, 0.25],
            lambda: vec![profile.lambda[0]],
            warnings: vec![],
        };
        let after_first = co_apply(&win, &first);
        let after_all = co_apply(&win, &profile);
        let col = |a: &Array3<f64>| -> Vec<f64> {
            let mut v: Vec<f64> = a.slice(s![.., 0, 0]).iter().copied().collect();
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            v
        };
        let sa = col(&after_first);
        let sb = col(&after_all);
        for p in [(1.0 - 0.25) / 2.0, (1.0 + 0.25) / 2.0] {
            assert_eq!(
                quantile_sorted(&sa, p).to_bits(),
                quantile_sorted(&sb, p).to_bits()
            );
        }
    }

    #[test]
    fn profile_round_trips_through_json() {
        let profile = CalibrationProfile {
            gamma: vec![0.0, 0.04, 0.08],
            lambda: vec![1.25, 0.9],
            warnings: vec!["x".into()],
        };
        let text = serde_json::to_string(&profile).unwrap();
        let back: CalibrationProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.gamma, profile.gamma);
        assert_eq!(back.lambda, profile.lambda);
        assert_eq!(back.warnings, profile.warnings);
    }

    #[test]
    fn finalize_with_unit_multipliers_degrades_to_sum() {
        let mut rng = stream_rng(3, StreamId::Validation);
        let res = Array3::from_shape_fn((12, 2, 2), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let y_hat = Array2::from_shape_fn((2, 2), |(t, j)| t as f64 + 10.0 * j as f64);
        let ones = Array2::ones((2, 2));
        let out = finalize(&y_hat, &res, &ones);
        for s_i in 0..12 {
            for t in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(
                        out[[s_i, t, j]],
                        y_hat[[t, j]] + res[[s_i, t, j]],
                        epsilon = 1e-12
                    );
                }
            }
        }
    }
}
