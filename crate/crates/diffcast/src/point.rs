//! Deterministic point estimators and the residual statistics derived from
//! them.
//!
//! Residuals are always `y - prediction` in the standardized data space; the
//! per-cell training scale [`fit_sigma_trn`] is what the diffusion stage uses
//! to normalize them.

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamId};
use ndarray::{Array2, Array3};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// One training or evaluation window: `x` is the history block `(N, d)`,
/// `y` the future block `(M, d)`.
#[derive(Debug, Clone)]
pub struct SeriesWindow {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    SeasonalNaive,
    LinearL1,
}

impl std::str::FromStr for PointKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seasonal_naive" => Ok(PointKind::SeasonalNaive),
            "linear_l1" => Ok(PointKind::LinearL1),
            other => Err(Error::Config(format!(
                "unknown point estimator '{other}' (expected seasonal_naive or linear_l1)"
            ))),
        }
    }
}

/// Point forecaster mapping a history block to a horizon block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PointEstimator {
    /// Repeats the last observed cycle of length `period`.
    SeasonalNaive { period: usize },
    /// Per-variate affine map from the history column: `weights[j]` is
    /// `(M, N)`, `bias` is `(M, d)`.
    LinearL1 {
        weights: Vec<Array2<f64>>,
        bias: Array2<f64>,
    },
}

impl PointEstimator {
    /// Forecast `(M, d)` from history `(N, d)`. The horizon length comes
    /// from the fitted shape (or `period` context for the naive model, which
    /// accepts any horizon).
    pub fn predict(&self, x: &Array2<f64>, horizon: usize) -> Array2<f64> {
        let (n, d) = x.dim();
        match self {
            PointEstimator::SeasonalNaive { period } => {
                assert!(*period >= 1 && *period <= n, "period outside history");
                let mut out = Array2::zeros((horizon, d));
                for t in 0..horizon {
                    let src = n - period + (t % period);
                    for j in 0..d {
                        out[[t, j]] = x[[src, j]];
                    }
                }
                out
            }
            PointEstimator::LinearL1 { weights, bias } => {
                assert_eq!(weights.len(), d, "variate count mismatch");
                let (m, n_fit) = weights[0].dim();
                assert_eq!(n_fit, n, "history length mismatch");
                assert_eq!(m, horizon, "horizon mismatch");
                let mut out = bias.clone();
                for j in 0..d {
                    let w = &weights[j];
                    for t in 0..m {
                        let mut acc = 0.0;
                        for i in 0..n {
                            acc += w[[t, i]] * x[[i, j]];
                        }
                        out[[t, j]] += acc;
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointFitOpts {
    pub kind: PointKind,
    /// Season length for the naive model.
    pub period: usize,
    /// Initial step size for L1 fitting.
    pub lr: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping (0 disables).
    pub patience: usize,
}

/// Fit a point estimator on `train`, early-stopping on `val` when provided.
pub fn fit_point_estimator(
    train: &[SeriesWindow],
    val: &[SeriesWindow],
    opts: &PointFitOpts,
) -> Result<PointEstimator> {
    if train.is_empty() {
        return Err(Error::Data(
            "no training windows for the point estimator".into(),
        ));
    }
    let (n, d) = train[0].x.dim();
    let m = train[0].y.dim().0;
    match opts.kind {
        PointKind::SeasonalNaive => {
            if opts.period == 0 || opts.period > n {
                return Err(Error::Config(format!(
                    "point.period must lie in 1..={n} (history length), got {}",
                    opts.period
                )));
            }
            Ok(PointEstimator::SeasonalNaive {
                period: opts.period,
            })
        }
        PointKind::LinearL1 => fit_linear_l1(train, val, n, m, d, opts),
    }
}

/// Incremental trainer for the L1 linear model, exposed so callers can
/// interleave point-estimator epochs with other work. Full-batch subgradient
/// descent on mean absolute error with an accept/revert step rule: a step
/// that would raise the training MAE is rolled back and the step size
/// halved, so the training loss never increases. Accepted steps grow the
/// step size slightly to re-accelerate.
pub struct L1Trainer {
    est: PointEstimator,
    lr: f64,
    train_mae: Option<f64>,
    horizon: usize,
}

impl L1Trainer {
    pub fn new(history: usize, horizon: usize, variates: usize, lr: f64) -> Result<L1Trainer> {
        if lr <= 0.0 {
            return Err(Error::Config(format!(
                "point.lr must be positive, got {lr}"
            )));
        }
        Ok(L1Trainer {
            est: PointEstimator::LinearL1 {
                weights: vec![Array2::zeros((horizon, history)); variates],
                bias: Array2::zeros((horizon, variates)),
            },
            lr,
            train_mae: None,
            horizon,
        })
    }

    /// One accept/revert step; returns the training MAE after it. Callers
    /// must pass the same window set every epoch, the cached loss assumes it.
    pub fn epoch(&mut self, train: &[SeriesWindow]) -> Result<f64> {
        let mae = match self.train_mae {
            Some(v) => v,
            None => mae_over(&self.est, train, self.horizon),
        };
        if self.stalled() {
            self.train_mae = Some(mae);
            return Ok(mae);
        }
        let (g_w, g_b) = l1_subgradient(&self.est, train, self.horizon);
        let candidate = step(&self.est, &g_w, &g_b, self.lr);
        let cand = mae_over(&candidate, train, self.horizon);
        if !cand.is_finite() {
            return Err(Error::Numeric(
                "non-finite loss while fitting linear_l1".into(),
            ));
        }
        if cand <= mae {
            self.est = candidate;
            self.train_mae = Some(cand);
            self.lr *= 1.05;
            Ok(cand)
        } else {
            self.lr *= 0.5;
            self.train_mae = Some(mae);
            Ok(mae)
        }
    }

    /// True once the step size has collapsed below any useful scale.
    pub fn stalled(&self) -> bool {
        self.lr < 1e-14
    }

    pub fn estimator(&self) -> &PointEstimator {
        &self.est
    }

    pub fn into_estimator(self) -> PointEstimator {
        self.est
    }
}

fn fit_linear_l1(
    train: &[SeriesWindow],
    val: &[SeriesWindow],
    n: usize,
    m: usize,
    d: usize,
    opts: &PointFitOpts,
) -> Result<PointEstimator> {
    let mut trainer = L1Trainer::new(n, m, d, opts.lr)?;
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;
    for _ in 0..opts.epochs {
        trainer.epoch(train)?;
        if trainer.stalled() {
            break;
        }
        if opts.patience > 0 && !val.is_empty() {
            let v = mae_over(trainer.estimator(), val, m);
            if v + 1e-12 < best_val {
                best_val = v;
                stale = 0;
            } else {
                stale += 1;
                if stale >= opts.patience {
                    break;
                }
            }
        }
    }
    Ok(trainer.into_estimator())
}

fn step(est: &PointEstimator, g_w: &[Array2<f64>], g_b: &Array2<f64>, lr: f64) -> PointEstimator {
    let PointEstimator::LinearL1 { weights, bias } = est else {
        unreachable!()
    };
    let new_w = weights
        .iter()
        .zip(g_w)
        .map(|(w, g)| w - &(g * lr))
        .collect();
    PointEstimator::LinearL1 {
        weights: new_w,
        bias: bias - &(g_b * lr),
    }
}

fn l1_subgradient(
    est: &PointEstimator,
    windows: &[SeriesWindow],
    m: usize,
) -> (Vec<Array2<f64>>, Array2<f64>) {
    let PointEstimator::LinearL1 { weights, bias } = est else {
        unreachable!()
    };
    let (m_fit, n) = weights[0].dim();
    debug_assert_eq!(m_fit, m);
    let d = bias.dim().1;
    let scale = 1.0 / (windows.len() * m * d) as f64;
    let mut g_w = vec![Array2::<f64>::zeros((m, n)); d];
    let mut g_b = Array2::<f64>::zeros((m, d));
    for w in windows {
        let pred = est.predict(&w.x, m);
        for t in 0..m {
            for j in 0..d {
                let e = pred[[t, j]] - w.y[[t, j]];
                let sg = if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                if sg != 0.0 {
                    g_b[[t, j]] += sg * scale;
                    for i in 0..n {
                        g_w[j][[t, i]] += sg * scale * w.x[[i, j]];
                    }
                }
            }
        }
    }
    (g_w, g_b)
}

/// Mean absolute prediction error over windows (all cells pooled).
pub fn mae_over(est: &PointEstimator, windows: &[SeriesWindow], horizon: usize) -> f64 {
    let mut total = 0.0;
    let mut cells = 0usize;
    for w in windows {
        let pred = est.predict(&w.x, horizon);
        total += (&w.y - &pred).iter().map(|e| e.abs()).sum::<f64>();
        cells += pred.len();
    }
    total / cells as f64
}

/// Prediction residuals `y - prediction` for every window, `(B, M, d)`.
pub fn residuals(est: &PointEstimator, windows: &[SeriesWindow]) -> Array3<f64> {
    assert!(!windows.is_empty());
    let (m, d) = windows[0].y.dim();
    let mut out = Array3::zeros((windows.len(), m, d));
    for (b, w) in windows.iter().enumerate() {
        let pred = est.predict(&w.x, m);
        let r = &w.y - &pred;
        out.slice_mut(ndarray::s![b, .., ..]).assign(&r);
    }
    out
}

/// Per-cell residual scale: root mean square over windows, floored at 1e-6
/// so degenerate cells stay invertible.
pub fn fit_sigma_trn(residuals: &Array3<f64>) -> Array2<f64> {
    let (b, m, d) = residuals.dim();
    assert!(b >= 2, "residual scale needs at least two windows");
    let mut out = Array2::zeros((m, d));
    for t in 0..m {
        for j in 0..d {
            let ms = (0..b).map(|w| residuals[[w, t, j]].powi(2)).sum::<f64>() / b as f64;
            out[[t, j]] = ms.sqrt().max(1e-6);
        }
    }
    out
}

/// Gaussian reference ensemble `(S, M, d)`: prediction plus per-cell
/// `sigma_trn`-scaled white noise, one RNG stream per (window, sample).
pub fn gaussian_baseline_ensemble(
    y_hat: &Array2<f64>,
    sigma_trn: &Array2<f64>,
    samples: usize,
    seed: u64,
    window: u64,
) -> Array3<f64> {
    let (m, d) = y_hat.dim();
    assert_eq!(sigma_trn.dim(), (m, d));
    assert!(samples >= 1);
    let mut out = Array3::zeros((samples, m, d));
    for s in 0..samples {
        let mut rng = stream_rng(
            seed,
            StreamId::Baseline {
                window,
                sample: s as u64,
            },
        );
        for t in 0..m {
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                out[[s, t, j]] = y_hat[[t, j]] + sigma_trn[[t, j]] * z;
            }
        }
    }
    out
}
