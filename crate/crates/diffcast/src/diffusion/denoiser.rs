//! Reference noise predictor: a two-hidden-layer MLP over the flattened
//! window with a separate step embedding and a scaled skip connection from
//! the corrupted state, trained with Adam on mean absolute error.
//!
//! Weights live in one flat parameter vector so the optimizer, serializer
//! and finite-difference checks all see the same layout. Backpropagation is
//! written out by hand against the exact GELU.

use crate::diffusion::{forward_diffuse, Denoiser};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamId};
use crate::schedule::DiffusionSchedule;
use crate::stats::{mean, normal_cdf, normal_pdf, std_pop};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Shape of the network and of the windows it conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDims {
    /// History length N.
    pub history: usize,
    /// Horizon length M.
    pub horizon: usize,
    /// Variates d.
    pub variates: usize,
    /// Width of both hidden layers.
    pub hidden: usize,
    /// Step embedding width.
    pub step_embed: usize,
    /// Total corruption steps K (scales the step input and the skip).
    pub steps_total: usize,
}

impl NetDims {
    /// Flattened input: standardized conditioning block plus corrupted state.
    pub fn input_len(&self) -> usize {
        (self.history + 2 * self.horizon) * self.variates
    }

    pub fn cond_len(&self) -> usize {
        (self.history + self.horizon) * self.variates
    }

    pub fn output_len(&self) -> usize {
        self.horizon * self.variates
    }

    pub fn param_len(&self) -> usize {
        self.offsets().total
    }

    fn offsets(&self) -> Offsets {
        let h = self.hidden;
        let dk = self.step_embed;
        let input = self.input_len();
        let output = self.output_len();
        let w1 = 0;
        let b1 = w1 + h * input;
        let we1 = b1 + h;
        let be1 = we1 + dk;
        let we2 = be1 + dk;
        let be2 = we2 + dk * dk;
        let w2 = be2 + dk;
        let b2 = w2 + h * (h + dk);
        let w3 = b2 + h;
        let b3 = w3 + output * h;
        let total = b3 + output;
        Offsets {
            w1,
            b1,
            we1,
            be1,
            we2,
            be2,
            w2,
            b2,
            w3,
            b3,
            total,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.history == 0
            || self.horizon == 0
            || self.variates == 0
            || self.hidden == 0
            || self.step_embed == 0
            || self.steps_total == 0
        {
            return Err(Error::Config(
                "network dimensions must all be positive".into(),
            ));
        }
        Ok(())
    }
}

struct Offsets {
    w1: usize,
    b1: usize,
    we1: usize,
    be1: usize,
    we2: usize,
    be2: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    total: usize,
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_deriv(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

/// One training example after corruption.
pub struct TrainExample<'a> {
    pub x: &'a Array2<f64>,
    pub y_hat: &'a Array2<f64>,
    pub r_k: &'a Array2<f64>,
    pub k: usize,
    /// Noise that produced `r_k`; the regression target.
    pub eps: &'a Array2<f64>,
}

/// MLP noise predictor over flat parameters.
#[derive(Debug, Clone)]
pub struct ReferenceDenoiser {
    dims: NetDims,
    theta: Vec<f64>,
}

impl ReferenceDenoiser {
    /// Zero-bias scaled-uniform init (`U(-1/sqrt(fan_in), 1/sqrt(fan_in))`)
    /// from the dedicated init stream of `seed`.
    pub fn init(dims: NetDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let o = dims.offsets();
        let mut theta = vec![0.0; o.total];
        let mut rng = stream_rng(seed, StreamId::Init);
        let mut fill = |lo: usize, hi: usize, fan_in: usize, rng: &mut rand_chacha::ChaCha12Rng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut theta[lo..hi] {
                *w = rng.random_range(-bound..bound);
            }
        };
        fill(o.w1, o.b1, dims.input_len(), &mut rng);
        fill(o.we1, o.be1, 1, &mut rng);
        fill(o.we2, o.be2, dims.step_embed, &mut rng);
        fill(o.w2, o.b2, dims.hidden + dims.step_embed, &mut rng);
        fill(o.w3, o.b3, dims.hidden, &mut rng);
        Ok(ReferenceDenoiser { dims, theta })
    }

    /// Rebuild from serialized parts; the length check guards against a
    /// bundle whose dims and weights disagree.
    pub fn from_parts(dims: NetDims, theta: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if theta.len() != dims.param_len() {
            return Err(Error::Data(format!(
                "weight vector has {} entries, dims require {}",
                theta.len(),
                dims.param_len()
            )));
        }
        Ok(ReferenceDenoiser { dims, theta })
    }

    pub fn dims(&self) -> &NetDims {
        &self.dims
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Standardize the conditioning block per variate and flatten it with
    /// the corrupted state into the network input.
    fn build_input(&self, x: &Array2<f64>, y_hat: &Array2<f64>, r_k: &Array2<f64>) -> Vec<f64> {
        let d = self.dims.variates;
        let n = self.dims.history;
        let m = self.dims.horizon;
        assert_eq!(x.dim(), (n, d), "history block shape");
        assert_eq!(y_hat.dim(), (m, d), "prediction block shape");
        assert_eq!(r_k.dim(), (m, d), "state block shape");
        let mut z = vec![0.0; self.dims.input_len()];
        let mut col = Vec::with_capacity(n + m);
        for j in 0..d {
            col.clear();
            col.extend((0..n).map(|t| x[[t, j]]));
            col.extend((0..m).map(|t| y_hat[[t, j]]));
            let mu = mean(&col);
            let sd = std_pop(&col).max(1e-9);
            for t in 0..n {
                z[t * d + j] = (x[[t, j]] - mu) / sd;
            }
            for t in 0..m {
                z[(n + t) * d + j] = (y_hat[[t, j]] - mu) / sd;
            }
        }
        let base = (n + m) * d;
        for t in 0..m {
            for j in 0..d {
                z[base + t * d + j] = r_k[[t, j]];
            }
        }
        z
    }

    fn forward(&self, x: &Array2<f64>, y_hat: &Array2<f64>, r_k: &Array2<f64>, k: usize) -> Cache {
        assert!(
            k >= 1 && k <= self.dims.steps_total,
            "step outside schedule"
        );
        let o = self.dims.offsets();
        let th = &self.theta;
        let h = self.dims.hidden;
        let dk = self.dims.step_embed;
        let input_len = self.dims.input_len();
        let out_len = self.dims.output_len();
        let tau = k as f64 / self.dims.steps_total as f64;

        let z_in = self.build_input(x, y_hat, r_k);

        let mut a1 = vec![0.0; h];
        for r in 0..h {
            let row = &th[o.w1 + r * input_len..o.w1 + (r + 1) * input_len];
            let mut acc = th[o.b1 + r];
            for c in 0..input_len {
                acc += row[c] * z_in[c];
            }
            a1[r] = acc;
        }
        let h1: Vec<f64> = a1.iter().map(|&v| gelu(v)).collect();

        let mut ae1 = vec![0.0; dk];
        for r in 0..dk {
            ae1[r] = th[o.we1 + r] * tau + th[o.be1 + r];
        }
        let he1: Vec<f64> = ae1.iter().map(|&v| gelu(v)).collect();
        let mut e = vec![0.0; dk];
        for r in 0..dk {
            let row = &th[o.we2 + r * dk..o.we2 + (r + 1) * dk];
            let mut acc = th[o.be2 + r];
            for c in 0..dk {
                acc += row[c] * he1[c];
            }
            e[r] = acc;
        }

        let z2_len = h + dk;
        let mut a2 = vec![0.0; h];
        for r in 0..h {
            let row = &th[o.w2 + r * z2_len..o.w2 + (r + 1) * z2_len];
            let mut acc = th[o.b2 + r];
            for c in 0..h {
                acc += row[c] * h1[c];
            }
            for c in 0..dk {
                acc += row[h + c] * e[c];
            }
            a2[r] = acc;
        }
        let h2: Vec<f64> = a2.iter().map(|&v| gelu(v)).collect();

        let mut eps_hat = vec![0.0; out_len];
        for r in 0..out_len {
            let row = &th[o.w3 + r * h..o.w3 + (r + 1) * h];
            let mut acc = th[o.b3 + r];
            for c in 0..h {
                acc += row[c] * h2[c];
            }
            eps_hat[r] = acc;
        }
        // Scaled skip from the corrupted state: at deep steps the state is
        // mostly noise, so passing it through helps before training starts.
        let d = self.dims.variates;
        for t in 0..self.dims.horizon {
            for j in 0..d {
                eps_hat[t * d + j] += r_k[[t, j]] * tau;
            }
        }
        Cache {
            z_in,
            a1,
            h1,
            ae1,
            he1,
            e,
            a2,
            h2,
            eps_hat,
            tau,
        }
    }

    /// Mean absolute error of the noise prediction for one example.
    pub fn loss(&self, ex: &TrainExample) -> f64 {
        let cache = self.forward(ex.x, ex.y_hat, ex.r_k, ex.k);
        let d = self.dims.variates;
        let out_len = self.dims.output_len();
        let mut acc = 0.0;
        for t in 0..self.dims.horizon {
            for j in 0..d {
                acc += (ex.eps[[t, j]] - cache.eps_hat[t * d + j]).abs();
            }
        }
        acc / out_len as f64
    }

    /// Loss plus parameter gradient, accumulated into `grad` (callers zero
    /// or average it across a batch). `grad.len()` must equal `param_len`.
    pub fn loss_grad(&self, ex: &TrainExample, grad: &mut [f64]) -> f64 {
        let o = self.dims.offsets();
        assert_eq!(grad.len(), o.total);
        let th = &self.theta;
        let h = self.dims.hidden;
        let dk = self.dims.step_embed;
        let d = self.dims.variates;
        let out_len = self.dims.output_len();
        let input_len = self.dims.input_len();
        let cache = self.forward(ex.x, ex.y_hat, ex.r_k, ex.k);

        let mut loss = 0.0;
        let mut g_out = vec![0.0; out_len];
        for t in 0..self.dims.horizon {
            for j in 0..d {
                let idx = t * d + j;
                let diff = ex.eps[[t, j]] - cache.eps_hat[idx];
                loss += diff.abs();
                // Subgradient of |diff| w.r.t. eps_hat; zero at the kink.
                let sg = if diff > 0.0 {
                    -1.0
                } else if diff < 0.0 {
                    1.0
                } else {
                    0.0
                };
                g_out[idx] = sg / out_len as f64;
            }
        }
        loss /= out_len as f64;

        let mut g_h2 = vec![0.0; h];
        for r in 0..out_len {
            let g = g_out[r];
            if g == 0.0 {
                continue;
            }
            grad[o.b3 + r] += g;
            let row = o.w3 + r * h;
            for c in 0..h {
                grad[row + c] += g * cache.h2[c];
                g_h2[c] += th[row + c] * g;
            }
        }

        let z2_len = h + dk;
        let mut g_h1 = vec![0.0; h];
        let mut g_e = vec![0.0; dk];
        for r in 0..h {
            let ga = g_h2[r] * gelu_deriv(cache.a2[r]);
            if ga == 0.0 {
                continue;
            }
            grad[o.b2 + r] += ga;
            let row = o.w2 + r * z2_len;
            for c in 0..h {
                grad[row + c] += ga * cache.h1[c];
                g_h1[c] += th[row + c] * ga;
            }
            for c in 0..dk {
                grad[row + h + c] += ga * cache.e[c];
                g_e[c] += th[row + h + c] * ga;
            }
        }

        let mut g_he1 = vec![0.0; dk];
        for r in 0..dk {
            let g = g_e[r];
            grad[o.be2 + r] += g;
            let row = o.we2 + r * dk;
            for c in 0..dk {
                grad[row + c] += g * cache.he1[c];
                g_he1[c] += th[row + c] * g;
            }
        }
        for r in 0..dk {
            let ga = g_he1[r] * gelu_deriv(cache.ae1[r]);
            grad[o.be1 + r] += ga;
            grad[o.we1 + r] += ga * cache.tau;
        }

        for r in 0..h {
            let ga = g_h1[r] * gelu_deriv(cache.a1[r]);
            if ga == 0.0 {
                continue;
            }
            grad[o.b1 + r] += ga;
            let row = o.w1 + r * input_len;
            for c in 0..input_len {
                grad[row + c] += ga * cache.z_in[c];
            }
        }
        loss
    }
}

impl Denoiser for ReferenceDenoiser {
    fn predict_noise(
        &self,
        r_k: &Array2<f64>,
        k: usize,
        x: &Array2<f64>,
        y_hat: &Array2<f64>,
    ) -> Array2<f64> {
        let cache = self.forward(x, y_hat, r_k, k);
        let d = self.dims.variates;
        Array2::from_shape_fn((self.dims.horizon, d), |(t, j)| cache.eps_hat[t * d + j])
    }
}

struct Cache {
    z_in: Vec<f64>,
    a1: Vec<f64>,
    h1: Vec<f64>,
    ae1: Vec<f64>,
    he1: Vec<f64>,
    e: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
    eps_hat: Vec<f64>,
    tau: f64,
}

/// Adam with coupled L2 decay: the decay term joins the raw gradient before
/// the moment updates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64, params: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: vec![0.0; params],
            v: vec![0.0; params],
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        assert_eq!(theta.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i] + self.weight_decay * theta[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One window prepared for residual training: conditioning blocks plus the
/// clean normalized residual.
#[derive(Debug, Clone)]
pub struct ResidualItem {
    pub x: Array2<f64>,
    pub y_hat: Array2<f64>,
    pub r0: Array2<f64>,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOpts {
    pub hidden: usize,
    pub step_embed: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Epochs without validation improvement before stopping (0 disables).
    pub patience: usize,
    pub seed: u64,
}

/// Loss trace entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

/// Fixed corruption draw used to score validation items identically across
/// epochs.
pub struct ValDraw {
    k: usize,
    eps: Array2<f64>,
}

/// Mutable training state: network, optimizer and the corruption schedule.
pub struct DenoiserTrainer {
    net: ReferenceDenoiser,
    adam: Adam,
    sched: DiffusionSchedule,
    batch: usize,
    seed: u64,
    grad: Vec<f64>,
}

impl DenoiserTrainer {
    // The lr check is written negated so NaN fails it too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(
        dims: NetDims,
        sched: DiffusionSchedule,
        opts: &TrainOpts,
    ) -> Result<DenoiserTrainer> {
        if opts.batch == 0 {
            return Err(Error::Config("denoiser.batch must be at least 1".into()));
        }
        if !(opts.lr > 0.0) {
            return Err(Error::Config(format!(
                "denoiser.lr must be positive, got {}",
                opts.lr
            )));
        }
        if opts.weight_decay < 0.0 {
            return Err(Error::Config(
                "denoiser.weight_decay cannot be negative".into(),
            ));
        }
        assert_eq!(
            dims.steps_total,
            sched.steps(),
            "schedule and dims disagree on K"
        );
        let net = ReferenceDenoiser::init(dims, opts.seed)?;
        let params = dims.param_len();
        Ok(DenoiserTrainer {
            net,
            adam: Adam::new(opts.lr, opts.weight_decay, params),
            sched,
            batch: opts.batch,
            seed: opts.seed,
            grad: vec![0.0; params],
        })
    }

    /// One shuffled pass: per item draw a step and a noise realization,
    /// corrupt, accumulate gradients, and take one optimizer step per batch.
    /// Returns the mean item loss.
    pub fn train_epoch(&mut self, items: &[ResidualItem], epoch: u64) -> Result<f64> {
        assert!(!items.is_empty(), "training on an empty item set");
        let k_total = self.sched.steps();
        let mut rng = stream_rng(self.seed, StreamId::TrainEpoch(epoch));
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(self.batch) {
            self.grad.iter_mut().for_each(|g| *g = 0.0);
            for &idx in chunk {
                let item = &items[idx];
                let k = rng.random_range(1..=k_total);
                let eps: Array2<f64> =
                    Array2::from_shape_fn(item.r0.dim(), |_| StandardNormal.sample(&mut rng));
                let r_k = forward_diffuse(&item.r0, k, &eps, &self.sched);
                let ex = TrainExample {
                    x: &item.x,
                    y_hat: &item.y_hat,
                    r_k: &r_k,
                    k,
                    eps: &eps,
                };
                loss_sum += self.net.loss_grad(&ex, &mut self.grad);
            }
            let scale = 1.0 / chunk.len() as f64;
            self.grad.iter_mut().for_each(|g| *g *= scale);
            self.adam.step(self.net.theta_mut(), &self.grad);
        }
        let mean_loss = loss_sum / items.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Numeric(
                "training loss diverged to a non-finite value".into(),
            ));
        }
        Ok(mean_loss)
    }

    /// Mean loss over items under fixed corruption draws.
    pub fn eval_loss(&self, items: &[ResidualItem], draws: &[ValDraw]) -> f64 {
        assert_eq!(items.len(), draws.len());
        let mut acc = 0.0;
        for (item, draw) in items.iter().zip(draws) {
            let r_k = forward_diffuse(&item.r0, draw.k, &draw.eps, &self.sched);
            let ex = TrainExample {
                x: &item.x,
                y_hat: &item.y_hat,
                r_k: &r_k,
                k: draw.k,
                eps: &draw.eps,
            };
            acc += self.net.loss(&ex);
        }
        acc / items.len() as f64
    }

    pub fn net(&self) -> &ReferenceDenoiser {
        &self.net
    }

    pub fn set_net(&mut self, net: ReferenceDenoiser) {
        assert_eq!(net.dims(), self.net.dims());
        self.net = net;
    }

    pub fn into_net(self) -> ReferenceDenoiser {
        self.net
    }
}

/// One fixed corruption draw per item from the validation stream.
pub fn make_val_draws(items: &[ResidualItem], k_total: usize, seed: u64) -> Vec<ValDraw> {
    let mut rng = stream_rng(seed, StreamId::Validation);
    items
        .iter()
        .map(|item| ValDraw {
            k: rng.random_range(1..=k_total),
            eps: Array2::from_shape_fn(item.r0.dim(), |_| StandardNormal.sample(&mut rng)),
        })
        .collect()
}

/// Train a denoiser, early-stopping on validation loss when both validation
/// items and a positive patience are given. Returns the best-validation
/// network (or the final one without validation) and the loss trace.
pub fn train_denoiser(
    train_items: &[ResidualItem],
    val_items: &[ResidualItem],
    dims: NetDims,
    sched: &DiffusionSchedule,
    opts: &TrainOpts,
) -> Result<(ReferenceDenoiser, Vec<EpochLoss>)> {
    if train_items.is_empty() {
        return Err(Error::Data("no training windows for the denoiser".into()));
    }
    let mut trainer = DenoiserTrainer::new(dims, sched.clone(), opts)?;
    let val_draws = make_val_draws(val_items, sched.steps(), opts.seed);
    let mut log = Vec::with_capacity(opts.epochs);
    let mut best: Option<(f64, ReferenceDenoiser)> = None;
    let mut stale = 0usize;
    for epoch in 0..opts.epochs {
        let train = trainer.train_epoch(train_items, epoch as u64)?;
        let val = if val_items.is_empty() {
            None
        } else {
            Some(trainer.eval_loss(val_items, &val_draws))
        };
        log.push(EpochLoss { epoch, train, val });
        if let Some(v) = val {
            let improved = best.as_ref().map_or(true, |(b, _)| v + 1e-12 < *b);
            if improved {
                best = Some((v, trainer.net().clone()));
                stale = 0;
            } else {
                stale += 1;
                if opts.patience > 0 && stale >= opts.patience {
                    break;
                }
            }
        }
    }
    let net = match best {
        Some((_, net)) => net,
        None => trainer.into_net(),
    };
    Ok((net, log))
}
