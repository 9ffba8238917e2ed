//! Run configuration: flat `key = value` files with dotted keys, `#`
//! comments, strict unknown-key rejection, and CLI overrides applied through
//! the same setter so both paths validate identically.

use crate::error::{Error, Result};
use crate::point::PointKind;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserCfg {
    pub hidden: usize,
    pub step_embed: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub weight_decay: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCfg {
    pub kind: String,
    pub period: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoCfg {
    pub gamma_start: f64,
    pub gamma_step: f64,
    pub gamma_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub data_path: Option<String>,
    pub history: usize,
    pub horizon: usize,
    pub stride: usize,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_schedule: String,
    pub inference_steps: usize,
    pub inference_schedule: String,
    pub samples: usize,
    pub alpha: f64,
    pub joint: bool,
    pub denoiser: DenoiserCfg,
    pub point: PointCfg,
    pub co: CoCfg,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            data_path: None,
            history: 24,
            horizon: 8,
            stride: 1,
            diffusion_steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
            beta_schedule: "linear".into(),
            inference_steps: 10,
            inference_schedule: "cosine".into(),
            samples: 100,
            alpha: 1.0,
            joint: false,
            denoiser: DenoiserCfg {
                hidden: 64,
                step_embed: 16,
                lr: 1e-3,
                epochs: 200,
                batch: 32,
                weight_decay: 1e-5,
                patience: 0,
            },
            point: PointCfg {
                kind: "linear_l1".into(),
                period: 24,
                lr: 0.1,
                epochs: 300,
                patience: 25,
            },
            co: CoCfg {
                gamma_start: 0.04,
                gamma_step: 0.04,
                gamma_max: 0.96,
            },
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "cannot parse boolean '{value}' for key '{key}'"
        ))),
    }
}

impl RunConfig {
    /// Apply one `key = value` assignment. Unknown keys are rejected rather
    /// than ignored so a typo cannot silently fall back to a default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "data.path" => self.data_path = Some(value.to_string()),
            "window.history" => self.history = parse_num(key, value)?,
            "window.horizon" => self.horizon = parse_num(key, value)?,
            "window.stride" => self.stride = parse_num(key, value)?,
            "diffusion.steps" => self.diffusion_steps = parse_num(key, value)?,
            "diffusion.beta_start" => self.beta_start = parse_num(key, value)?,
            "diffusion.beta_end" => self.beta_end = parse_num(key, value)?,
            "diffusion.schedule" => self.beta_schedule = value.to_string(),
            "inference.steps" => self.inference_steps = parse_num(key, value)?,
            "inference.schedule" => self.inference_schedule = value.to_string(),
            "samples" => self.samples = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "joint" => self.joint = parse_bool(key, value)?,
            "denoiser.hidden" => self.denoiser.hidden = parse_num(key, value)?,
            "denoiser.step_embed" => self.denoiser.step_embed = parse_num(key, value)?,
            "denoiser.lr" => self.denoiser.lr = parse_num(key, value)?,
            "denoiser.epochs" => self.denoiser.epochs = parse_num(key, value)?,
            "denoiser.batch" => self.denoiser.batch = parse_num(key, value)?,
            "denoiser.weight_decay" => self.denoiser.weight_decay = parse_num(key, value)?,
            "denoiser.patience" => self.denoiser.patience = parse_num(key, value)?,
            "point.kind" => self.point.kind = value.to_string(),
            "point.period" => self.point.period = parse_num(key, value)?,
            "point.lr" => self.point.lr = parse_num(key, value)?,
            "point.epochs" => self.point.epochs = parse_num(key, value)?,
            "point.patience" => self.point.patience = parse_num(key, value)?,
            "co.gamma_start" => self.co.gamma_start = parse_num(key, value)?,
            "co.gamma_step" => self.co.gamma_step = parse_num(key, value)?,
            "co.gamma_max" => self.co.gamma_max = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parse a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Cross-field validation; called by every run entry point.
    // Positivity checks are written negated so NaN fails them too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.history == 0 || self.horizon == 0 || self.stride == 0 {
            return Err(Error::Config(
                "window.history/horizon/stride must be positive".into(),
            ));
        }
        if self.diffusion_steps == 0 {
            return Err(Error::Config("diffusion.steps must be at least 1".into()));
        }
        if self.inference_steps == 0 || self.inference_steps > self.diffusion_steps {
            return Err(Error::Config(format!(
                "inference.steps must lie in 1..={}, got {}",
                self.diffusion_steps, self.inference_steps
            )));
        }
        if self.beta_schedule != "linear" {
            return Err(Error::Config(format!(
                "unknown diffusion.schedule '{}' (expected linear)",
                self.beta_schedule
            )));
        }
        if self.inference_schedule != "cosine" {
            return Err(Error::Config(format!(
                "unknown inference.schedule '{}' (expected cosine)",
                self.inference_schedule
            )));
        }
        if !(self.beta_start > 0.0 && self.beta_start <= self.beta_end && self.beta_end < 1.0) {
            return Err(Error::Config(format!(
                "beta range must satisfy 0 < start <= end < 1, got [{}, {}]",
                self.beta_start, self.beta_end
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        PointKind::from_str(&self.point.kind)?;
        if self.denoiser.hidden == 0 || self.denoiser.step_embed == 0 {
            return Err(Error::Config(
                "denoiser.hidden and denoiser.step_embed must be positive".into(),
            ));
        }
        if self.denoiser.batch == 0 {
            return Err(Error::Config("denoiser.batch must be at least 1".into()));
        }
        if !(self.denoiser.lr > 0.0) || !(self.point.lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.denoiser.weight_decay < 0.0 {
            return Err(Error::Config(
                "denoiser.weight_decay cannot be negative".into(),
            ));
        }
        if !(self.co.gamma_start > 0.0)
            || !(self.co.gamma_step > 0.0)
            || self.co.gamma_max >= 1.0
            || self.co.gamma_max < self.co.gamma_start
        {
            return Err(Error::Config(format!(
                "coverage grid must satisfy 0 < start <= max < 1 with positive step, got \
                 start={} step={} max={}",
                self.co.gamma_start, self.co.gamma_step, self.co.gamma_max
            )));
        }
        Ok(())
    }

    /// Coverage ladder: base level 0 plus the configured grid. Levels are
    /// generated by index so accumulated float error cannot change the count.
    pub fn gamma_ladder(&self) -> Vec<f64> {
        let n = ((self.co.gamma_max - self.co.gamma_start) / self.co.gamma_step + 1e-9).floor()
            as usize;
        let mut ladder = Vec::with_capacity(n + 2);
        ladder.push(0.0);
        for i in 0..=n {
            ladder.push(self.co.gamma_start + i as f64 * self.co.gamma_step);
        }
        ladder
    }

    pub fn point_kind(&self) -> PointKind {
        PointKind::from_str(&self.point.kind).expect("validated config")
    }
}
