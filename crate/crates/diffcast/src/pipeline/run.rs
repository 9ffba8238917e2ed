//! Drivers behind the CLI verbs: fit a bundle, calibrate its coverage,
//! score it against reference arms, and emit forecast tables.

use crate::diffusion::denoiser::make_val_draws;
use crate::diffusion::{
    sample_ensemble, sample_ensemble_states, train_denoiser, DenoiserTrainer, EpochLoss, NetDims,
    ReferenceDenoiser, ResidualItem, TrainOpts,
};
use crate::error::{Error, Result};
use crate::matching::{co_apply, co_fit, eae_lambda, finalize};
use crate::metrics::{compute_report, crps_mean, MetricReport};
use crate::pipeline::bundle::{ModelBundle, BUNDLE_FORMAT};
use crate::pipeline::config::RunConfig;
use crate::pipeline::data::{Dataset, Split};
use crate::pipeline::fmt_sig9;
use crate::point::{
    fit_point_estimator, fit_sigma_trn, gaussian_baseline_ensemble, residuals, L1Trainer,
    PointEstimator, PointFitOpts, PointKind, SeriesWindow,
};
use crate::schedule::{build_linear_beta, DiffusionSchedule, InferenceSchedule};
use crate::stats::{mean, quantile_sorted, std_pop};
use ndarray::{s, Array2, Array3, Array4};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// One evaluation configuration. The diffusion arms share the sampled
/// ensemble within a run, so their scores differ only by the matching steps
/// applied on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// The point forecast alone, scored as a one-member ensemble.
    PointOnly,
    /// Point forecast plus white noise at the training residual scale.
    GaussianBaseline,
    /// Diffusion ensemble drawn with a single reverse jump.
    OneStep,
    /// Full multi-jump diffusion ensemble, no matching.
    Ddim,
    /// Diffusion ensemble with error-aware expansion.
    DdimEae,
    /// Diffusion ensemble with coverage shells, then expansion.
    DdimEaeCo,
}

impl Arm {
    pub const ALL: [Arm; 6] = [
        Arm::PointOnly,
        Arm::GaussianBaseline,
        Arm::OneStep,
        Arm::Ddim,
        Arm::DdimEae,
        Arm::DdimEaeCo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::PointOnly => "point_only",
            Arm::GaussianBaseline => "gaussian_baseline",
            Arm::OneStep => "one_step",
            Arm::Ddim => "ddim",
            Arm::DdimEae => "ddim_eae",
            Arm::DdimEaeCo => "ddim_eae_co",
        }
    }

    pub fn needs_calibration(self) -> bool {
        matches!(self, Arm::DdimEaeCo)
    }

    fn needs_ddim(self) -> bool {
        matches!(self, Arm::Ddim | Arm::DdimEae | Arm::DdimEaeCo)
    }

    /// Every arm the bundle can serve, in reporting order.
    pub fn defaults(calibrated: bool) -> Vec<Arm> {
        Arm::ALL
            .iter()
            .copied()
            .filter(|a| calibrated || !a.needs_calibration())
            .collect()
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Arm> {
        Arm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown arm '{s}' (expected one of point_only, gaussian_baseline, one_step, ddim, ddim_eae, ddim_eae_co)")))
    }
}

fn point_opts(cfg: &RunConfig) -> PointFitOpts {
    PointFitOpts {
        kind: cfg.point_kind(),
        period: cfg.point.period,
        lr: cfg.point.lr,
        epochs: cfg.point.epochs,
        patience: cfg.point.patience,
    }
}

fn train_opts(cfg: &RunConfig) -> TrainOpts {
    TrainOpts {
        hidden: cfg.denoiser.hidden,
        step_embed: cfg.denoiser.step_embed,
        epochs: cfg.denoiser.epochs,
        batch: cfg.denoiser.batch,
        lr: cfg.denoiser.lr,
        weight_decay: cfg.denoiser.weight_decay,
        patience: cfg.denoiser.patience,
        seed: cfg.seed,
    }
}

fn net_dims(cfg: &RunConfig, variates: usize) -> NetDims {
    NetDims {
        history: cfg.history,
        horizon: cfg.horizon,
        variates,
        hidden: cfg.denoiser.hidden,
        step_embed: cfg.denoiser.step_embed,
        steps_total: cfg.diffusion_steps,
    }
}

/// Normalized denoiser targets: per window the conditioning block and the
/// residual scaled by the per-cell training deviation.
fn residual_items(
    windows: &[SeriesWindow],
    est: &PointEstimator,
    sigma: &Array2<f64>,
) -> Vec<ResidualItem> {
    let m = sigma.dim().0;
    windows
        .iter()
        .map(|w| {
            let y_hat = est.predict(&w.x, m);
            let r0 = (&w.y - &y_hat) / sigma;
            ResidualItem {
                x: w.x.clone(),
                y_hat,
                r0,
            }
        })
        .collect()
}

fn check_compat(bundle: &ModelBundle, data: &Dataset) -> Result<()> {
    if data.variates() != bundle.dims.variates {
        return Err(Error::Data(format!(
            "dataset has {} variates, bundle was trained on {}",
            data.variates(),
            bundle.dims.variates
        )));
    }
    Ok(())
}

fn stack3(mats: &[Array2<f64>]) -> Array3<f64> {
    let (m, d) = mats[0].dim();
    let mut out = Array3::zeros((mats.len(), m, d));
    for (b, a) in mats.iter().enumerate() {
        out.slice_mut(s![b, .., ..]).assign(a);
    }
    out
}

fn stack4(mats: &[Array3<f64>]) -> Array4<f64> {
    let (s_n, m, d) = mats[0].dim();
    let mut out = Array4::zeros((mats.len(), s_n, m, d));
    for (b, a) in mats.iter().enumerate() {
        out.slice_mut(s![b, .., .., ..]).assign(a);
    }
    out
}

/// Fit the model described by `cfg` on the dataset at `cfg.data_path` and
/// return the trained bundle; the caller persists it.
pub fn run_train(cfg: &RunConfig) -> Result<ModelBundle> {
    let path = cfg
        .data_path
        .as_deref()
        .ok_or_else(|| Error::Config("data.path is required for training".into()))?;
    let data = Dataset::load_csv(Path::new(path))?;
    run_train_on(cfg, &data)
}

/// Training core, split out so tests can feed an in-memory dataset.
pub fn run_train_on(cfg: &RunConfig, data: &Dataset) -> Result<ModelBundle> {
    cfg.validate()?;
    let (n, m) = (cfg.history, cfg.horizon);
    let train_w = data.windows(Split::Train, n, m, cfg.stride);
    let val_w = data.windows(Split::Val, n, m, cfg.stride);
    if train_w.len() < 2 {
        return Err(Error::Data(format!(
            "training split yields {} windows of history {n} + horizon {m}; need at least 2",
            train_w.len()
        )));
    }
    let dims = net_dims(cfg, data.variates());
    let sched = build_linear_beta(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end)?;

    // Joint mode only changes anything when the point estimator has
    // trainable parameters; the seasonal naive model is fixed, so its
    // residuals are the same whether fitted before or alongside.
    let (point, sigma_trn, net, train_log) = if cfg.joint && cfg.point_kind() == PointKind::LinearL1
    {
        joint_train(cfg, &train_w, &val_w, dims, &sched)?
    } else {
        let est = fit_point_estimator(&train_w, &val_w, &point_opts(cfg))?;
        let sigma = fit_sigma_trn(&residuals(&est, &train_w));
        let train_items = residual_items(&train_w, &est, &sigma);
        let val_items = residual_items(&val_w, &est, &sigma);
        let (net, log) = train_denoiser(&train_items, &val_items, dims, &sched, &train_opts(cfg))?;
        (est, sigma, net, log)
    };

    Ok(ModelBundle {
        format: BUNDLE_FORMAT,
        config: cfg.clone(),
        dims,
        point,
        sigma_trn,
        theta: net.theta().to_vec(),
        train_log,
        data_mean: data.mean.clone(),
        data_std: data.std.clone(),
        variate_names: data.names.clone(),
        calibration: None,
    })
}

/// Interleaved fitting: each epoch advances the point estimator one step,
/// refreshes the residual scale and normalized targets, then advances the
/// denoiser one epoch, so the denoiser always trains against the residuals
/// of the current point model. Early stopping snapshots the point model and
/// scale together with the network; the three only make sense as a set.
fn joint_train(
    cfg: &RunConfig,
    train_w: &[SeriesWindow],
    val_w: &[SeriesWindow],
    dims: NetDims,
    sched: &DiffusionSchedule,
) -> Result<(
    PointEstimator,
    Array2<f64>,
    ReferenceDenoiser,
    Vec<EpochLoss>,
)> {
    let opts = train_opts(cfg);
    if opts.epochs == 0 {
        return Err(Error::Config(
            "denoiser.epochs must be at least 1 for joint training".into(),
        ));
    }
    let mut l1 = L1Trainer::new(cfg.history, cfg.horizon, dims.variates, cfg.point.lr)?;
    let mut trainer = DenoiserTrainer::new(dims, sched.clone(), &opts)?;
    let mut log = Vec::with_capacity(opts.epochs);
    let mut best: Option<(f64, ReferenceDenoiser, PointEstimator, Array2<f64>)> = None;
    let mut stale = 0usize;
    let mut sigma = fit_sigma_trn(&residuals(l1.estimator(), train_w));
    for epoch in 0..opts.epochs {
        l1.epoch(train_w)?;
        sigma = fit_sigma_trn(&residuals(l1.estimator(), train_w));
        let train_items = residual_items(train_w, l1.estimator(), &sigma);
        let train = trainer.train_epoch(&train_items, epoch as u64)?;
        let val = if val_w.is_empty() {
            None
        } else {
            let val_items = residual_items(val_w, l1.estimator(), &sigma);
            let draws = make_val_draws(&val_items, sched.steps(), opts.seed);
            Some(trainer.eval_loss(&val_items, &draws))
        };
        log.push(EpochLoss { epoch, train, val });
        if let Some(v) = val {
            let improved = best.as_ref().map_or(true, |(b, ..)| v + 1e-12 < *b);
            if improved {
                best = Some((
                    v,
                    trainer.net().clone(),
                    l1.estimator().clone(),
                    sigma.clone(),
                ));
                stale = 0;
            } else if opts.patience > 0 {
                stale += 1;
                if stale >= opts.patience {
                    break;
                }
            }
        }
    }
    let (est, sigma, net) = match best {
        Some((_, net, est, sigma)) => (est, sigma, net),
        None => (l1.into_estimator(), sigma, trainer.into_net()),
    };
    Ok((est, sigma, net, log))
}

/// Fit the coverage profile on the validation split and store it in the
/// bundle. Ensembles are drawn with the bundle's own sampler, so the fitted
/// multipliers correct exactly the distribution the model emits. Returns
/// fitting warnings for the caller to surface.
pub fn run_calibrate(bundle: &mut ModelBundle, data: &Dataset) -> Result<Vec<String>> {
    check_compat(bundle, data)?;
    let cfg = bundle.config.clone();
    if cfg.samples < 2 {
        return Err(Error::Config(
            "samples must be at least 2 to calibrate".into(),
        ));
    }
    let net = bundle.denoiser()?;
    let sched = bundle.schedule()?;
    let inf = bundle.inference_schedule()?;
    let val_w = data.windows_using(
        &bundle.data_mean,
        &bundle.data_std,
        Split::Val,
        cfg.history,
        cfg.horizon,
        cfg.stride,
    );
    if val_w.is_empty() {
        return Err(Error::Data(
            "validation split yields no windows to calibrate on".into(),
        ));
    }
    let m = cfg.horizon;
    let per: Vec<(Array2<f64>, Array3<f64>)> = val_w
        .par_iter()
        .enumerate()
        .map(|(w, win)| -> Result<(Array2<f64>, Array3<f64>)> {
            let y_hat = bundle.point.predict(&win.x, m);
            let res = sample_ensemble(
                &net,
                &win.x,
                &y_hat,
                &bundle.sigma_trn,
                &sched,
                &inf,
                cfg.samples,
                cfg.seed,
                w as u64,
            )?;
            Ok((&win.y - &y_hat, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let (truth_mats, ens_mats): (Vec<_>, Vec<_>) = per.into_iter().unzip();
    let truths = stack3(&truth_mats);
    let ens = stack4(&ens_mats);
    let profile = co_fit(&truths, &ens, &cfg.gamma_ladder())?;
    let warnings = profile.warnings.clone();
    bundle.calibration = Some(profile);
    Ok(warnings)
}

/// Scores for one arm.
#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    pub arm: String,
    pub samples: usize,
    pub metrics: MetricReport,
}

/// Pooled CRPS of the partially denoised ensemble after `jumps` reverse
/// jumps; `kappa` is the corruption step the state sits at (0 = fully
/// denoised).
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub jumps: usize,
    pub kappa: usize,
    pub crps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub windows: usize,
    pub samples: usize,
    pub arms: Vec<ArmReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryRow>>,
}

struct WinRaw {
    y: Array2<f64>,
    y_hat: Array2<f64>,
    ddim: Option<Array3<f64>>,
    one_step: Option<Array3<f64>>,
    baseline: Option<Array3<f64>>,
    states: Option<Vec<Array3<f64>>>,
}

/// Score the requested arms on the test split. All scoring happens in the
/// standardized data space so arms are comparable across variates.
pub fn run_evaluate(
    bundle: &ModelBundle,
    data: &Dataset,
    arms: &[Arm],
    trajectory: bool,
) -> Result<EvalOutput> {
    check_compat(bundle, data)?;
    if arms.is_empty() {
        return Err(Error::Config("no evaluation arms requested".into()));
    }
    let profile = bundle.calibration.as_ref();
    if arms.iter().any(|a| a.needs_calibration()) && profile.is_none() {
        return Err(Error::Config(
            "arm ddim_eae_co needs a calibrated bundle; run calibrate first".into(),
        ));
    }
    let cfg = &bundle.config;
    if cfg.samples < 2 {
        return Err(Error::Config(
            "samples must be at least 2 to evaluate".into(),
        ));
    }
    let net = bundle.denoiser()?;
    let sched = bundle.schedule()?;
    let inf = bundle.inference_schedule()?;
    let test_w = data.windows_using(
        &bundle.data_mean,
        &bundle.data_std,
        Split::Test,
        cfg.history,
        cfg.horizon,
        cfg.stride,
    );
    if test_w.is_empty() {
        return Err(Error::Data(
            "test split yields no windows to evaluate".into(),
        ));
    }
    let m = cfg.horizon;
    let d = bundle.dims.variates;
    let need_ddim = arms.iter().any(|a| a.needs_ddim());
    let need_one = arms.contains(&Arm::OneStep);
    let need_base = arms.contains(&Arm::GaussianBaseline);
    let one = InferenceSchedule::single_step(cfg.diffusion_steps);

    let raws: Vec<WinRaw> = test_w
        .par_iter()
        .enumerate()
        .map(|(w, win)| -> Result<WinRaw> {
            let y_hat = bundle.point.predict(&win.x, m);
            let states = if trajectory {
                Some(sample_ensemble_states(
                    &net,
                    &win.x,
                    &y_hat,
                    &bundle.sigma_trn,
                    &sched,
                    &inf,
                    cfg.samples,
                    cfg.seed,
                    w as u64,
                )?)
            } else {
                None
            };
            // The final trajectory state and the plain ensemble come from the
            // same sample streams, so reuse it rather than redrawing.
            let ddim = if need_ddim {
                Some(match &states {
                    Some(st) => st.last().expect("states non-empty").clone(),
                    None => sample_ensemble(
                        &net,
                        &win.x,
                        &y_hat,
                        &bundle.sigma_trn,
                        &sched,
                        &inf,
                        cfg.samples,
                        cfg.seed,
                        w as u64,
                    )?,
                })
            } else {
                None
            };
            let one_step = if need_one {
                Some(sample_ensemble(
                    &net,
                    &win.x,
                    &y_hat,
                    &bundle.sigma_trn,
                    &sched,
                    &one,
                    cfg.samples,
                    cfg.seed,
                    w as u64,
                )?)
            } else {
                None
            };
            let baseline = if need_base {
                Some(gaussian_baseline_ensemble(
                    &y_hat,
                    &bundle.sigma_trn,
                    cfg.samples,
                    cfg.seed,
                    w as u64,
                ))
            } else {
                None
            };
            Ok(WinRaw {
                y: win.y.clone(),
                y_hat,
                ddim,
                one_step,
                baseline,
                states,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let b = raws.len();
    let mut truths = Array3::zeros((b, m, d));
    for (i, r) in raws.iter().enumerate() {
        truths.slice_mut(s![i, .., ..]).assign(&r.y);
    }

    let ones = Array2::from_elem((m, d), 1.0);
    let mut reports = Vec::with_capacity(arms.len());
    for &arm in arms {
        let per_window: Vec<Array3<f64>> = match arm {
            Arm::PointOnly => raws
                .iter()
                .map(|r| {
                    let mut e = Array3::zeros((1, m, d));
                    e.slice_mut(s![0, .., ..]).assign(&r.y_hat);
                    e
                })
                .collect(),
            Arm::GaussianBaseline => raws
                .iter()
                .map(|r| r.baseline.clone().expect("baseline computed"))
                .collect(),
            Arm::OneStep => raws
                .iter()
                .map(|r| {
                    finalize(
                        &r.y_hat,
                        r.one_step.as_ref().expect("one-step computed"),
                        &ones,
                    )
                })
                .collect(),
            Arm::Ddim => raws
                .iter()
                .map(|r| finalize(&r.y_hat, r.ddim.as_ref().expect("ddim computed"), &ones))
                .collect(),
            Arm::DdimEae => raws
                .iter()
                .map(|r| {
                    let res = r.ddim.as_ref().expect("ddim computed");
                    finalize(&r.y_hat, res, &eae_lambda(res, cfg.alpha))
                })
                .collect(),
            Arm::DdimEaeCo => raws
                .iter()
                .map(|r| {
                    let res = co_apply(
                        r.ddim.as_ref().expect("ddim computed"),
                        profile.expect("calibration checked above"),
                    );
                    finalize(&r.y_hat, &res, &eae_lambda(&res, cfg.alpha))
                })
                .collect(),
        };
        let ens = stack4(&per_window);
        reports.push(ArmReport {
            arm: arm.name().to_string(),
            samples: ens.dim().1,
            metrics: compute_report(&truths, &ens),
        });
    }

    let trajectory_rows = if trajectory {
        let w_len = inf.len();
        let mut rows = Vec::with_capacity(w_len + 1);
        for i in 0..=w_len {
            let per: Vec<Array3<f64>> = raws
                .iter()
                .map(|r| {
                    finalize(
                        &r.y_hat,
                        &r.states.as_ref().expect("states computed")[i],
                        &ones,
                    )
                })
                .collect();
            let ens = stack4(&per);
            rows.push(TrajectoryRow {
                jumps: i,
                kappa: inf.kappa(w_len - i),
                crps: crps_mean(&truths, &ens),
            });
        }
        Some(rows)
    } else {
        None
    };

    Ok(EvalOutput {
        windows: b,
        samples: cfg.samples,
        arms: reports,
        trajectory: trajectory_rows,
    })
}

/// Windows of the requested split and, per window, the fully matched
/// forecast ensemble in standardized space: diffusion samples, coverage
/// shells when the bundle is calibrated, then error-aware expansion.
fn matched_ensembles(
    bundle: &ModelBundle,
    data: &Dataset,
    split: Split,
) -> Result<(Vec<SeriesWindow>, Vec<Array3<f64>>)> {
    check_compat(bundle, data)?;
    let cfg = &bundle.config;
    if cfg.samples < 2 {
        return Err(Error::Config(
            "samples must be at least 2 to forecast".into(),
        ));
    }
    let net = bundle.denoiser()?;
    let sched = bundle.schedule()?;
    let inf = bundle.inference_schedule()?;
    let wins = data.windows_using(
        &bundle.data_mean,
        &bundle.data_std,
        split,
        cfg.history,
        cfg.horizon,
        cfg.stride,
    );
    if wins.is_empty() {
        return Err(Error::Data(
            "selected split yields no windows to forecast".into(),
        ));
    }
    let m = cfg.horizon;
    let ens = wins
        .par_iter()
        .enumerate()
        .map(|(w, win)| -> Result<Array3<f64>> {
            let y_hat = bundle.point.predict(&win.x, m);
            let mut res = sample_ensemble(
                &net,
                &win.x,
                &y_hat,
                &bundle.sigma_trn,
                &sched,
                &inf,
                cfg.samples,
                cfg.seed,
                w as u64,
            )?;
            if let Some(p) = &bundle.calibration {
                res = co_apply(&res, p);
            }
            let lam = eae_lambda(&res, cfg.alpha);
            Ok(finalize(&y_hat, &res, &lam))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((wins, ens))
}

/// Forecast tables in raw data units.
#[derive(Debug, Clone)]
pub struct ForecastOutput {
    /// `window,sample,step,<variate...>`, one row per ensemble member cell.
    pub samples_csv: String,
    /// `window,step,variate,mean,std,p05,p50,p95`.
    pub summary_csv: String,
}

/// Forecast every test-split window with the full matched pipeline and
/// de-standardize back to the units of the input file.
pub fn run_forecast(bundle: &ModelBundle, data: &Dataset) -> Result<ForecastOutput> {
    let (_, ens) = matched_ensembles(bundle, data, Split::Test)?;
    let cfg = &bundle.config;
    let m = cfg.horizon;
    let d = bundle.dims.variates;
    let raw = |v: f64, j: usize| v * bundle.data_std[j] + bundle.data_mean[j];

    let mut samples_csv = String::from("window,sample,step");
    for name in &bundle.variate_names {
        samples_csv.push(',');
        samples_csv.push_str(name);
    }
    samples_csv.push('\n');
    for (w, e) in ens.iter().enumerate() {
        for s_i in 0..cfg.samples {
            for t in 0..m {
                let _ = write!(samples_csv, "{w},{s_i},{}", t + 1);
                for j in 0..d {
                    samples_csv.push(',');
                    samples_csv.push_str(&fmt_sig9(raw(e[[s_i, t, j]], j)));
                }
                samples_csv.push('\n');
            }
        }
    }

    let mut summary_csv = String::from("window,step,variate,mean,std,p05,p50,p95\n");
    let mut cell = Vec::with_capacity(cfg.samples);
    for (w, e) in ens.iter().enumerate() {
        for t in 0..m {
            for j in 0..d {
                cell.clear();
                cell.extend(e.slice(s![.., t, j]).iter().map(|&v| raw(v, j)));
                cell.sort_by(|a, b| a.partial_cmp(b).expect("non-finite forecast value"));
                let _ = writeln!(
                    summary_csv,
                    "{w},{},{},{},{},{},{},{}",
                    t + 1,
                    bundle.variate_names[j],
                    fmt_sig9(mean(&cell)),
                    fmt_sig9(std_pop(&cell)),
                    fmt_sig9(quantile_sorted(&cell, 0.05)),
                    fmt_sig9(quantile_sorted(&cell, 0.50)),
                    fmt_sig9(quantile_sorted(&cell, 0.95)),
                );
            }
        }
    }

    Ok(ForecastOutput {
        samples_csv,
        summary_csv,
    })
}

/// Table for external plotting: per test cell the truth, the matched
/// ensemble mean and the one- and two-deviation bands around it, all in raw
/// data units.
pub fn plot_data_csv(bundle: &ModelBundle, data: &Dataset) -> Result<String> {
    let (wins, ens) = matched_ensembles(bundle, data, Split::Test)?;
    let cfg = &bundle.config;
    let m = cfg.horizon;
    let d = bundle.dims.variates;
    let raw = |v: f64, j: usize| v * bundle.data_std[j] + bundle.data_mean[j];

    let mut out = String::from("window,step,variate,truth,mean,lo1,hi1,lo2,hi2\n");
    let mut cell = Vec::with_capacity(cfg.samples);
    for (w, (win, e)) in wins.iter().zip(&ens).enumerate() {
        for t in 0..m {
            for j in 0..d {
                cell.clear();
                cell.extend(e.slice(s![.., t, j]).iter().map(|&v| raw(v, j)));
                let mu = mean(&cell);
                let sd = std_pop(&cell);
                let _ = writeln!(
                    out,
                    "{w},{},{},{},{},{},{},{},{}",
                    t + 1,
                    bundle.variate_names[j],
                    fmt_sig9(raw(win.y[[t, j]], j)),
                    fmt_sig9(mu),
                    fmt_sig9(mu - sd),
                    fmt_sig9(mu + sd),
                    fmt_sig9(mu - 2.0 * sd),
                    fmt_sig9(mu + 2.0 * sd),
                );
            }
        }
    }
    Ok(out)
}
