//! Trained model bundle: one versioned JSON document holding everything
//! needed to reproduce forecasts (config echo, point estimator, residual
//! scale, denoiser weights, standardization statistics, optional calibration
//! profile). Serialization is field-ordered, so identical runs produce
//! byte-identical bundles.

use crate::diffusion::{EpochLoss, NetDims, ReferenceDenoiser};
use crate::error::{io_data, Error, Result};
use crate::matching::CalibrationProfile;
use crate::pipeline::config::RunConfig;
use crate::point::PointEstimator;
use crate::schedule::{
    build_cosine_kappa, build_linear_beta, DiffusionSchedule, InferenceSchedule,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const BUNDLE_FORMAT: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: u32,
    pub config: RunConfig,
    pub dims: NetDims,
    pub point: PointEstimator,
    /// Per-cell residual scale `(M, d)` fitted on the training split.
    pub sigma_trn: Array2<f64>,
    /// Flat denoiser weights matching `dims`.
    pub theta: Vec<f64>,
    pub train_log: Vec<EpochLoss>,
    /// Standardization statistics frozen from the training file; applied to
    /// any data the bundle later forecasts or evaluates on.
    pub data_mean: Vec<f64>,
    pub data_std: Vec<f64>,
    pub variate_names: Vec<String>,
    pub calibration: Option<CalibrationProfile>,
}

impl ModelBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self)
            .map_err(|e| Error::Data(format!("cannot serialize bundle: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| io_data(&format!("{}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<ModelBundle> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| io_data(&format!("{}", path.display()), e))?;
        let bundle: ModelBundle = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: malformed bundle: {e}", path.display())))?;
        if bundle.format != BUNDLE_FORMAT {
            return Err(Error::Data(format!(
                "{}: bundle format {} unsupported (expected {BUNDLE_FORMAT})",
                path.display(),
                bundle.format
            )));
        }
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<()> {
        if self.theta.len() != self.dims.param_len() {
            return Err(Error::Data(format!(
                "bundle weights have {} entries, dims require {}",
                self.theta.len(),
                self.dims.param_len()
            )));
        }
        if self.sigma_trn.dim() != (self.dims.horizon, self.dims.variates) {
            return Err(Error::Data("bundle residual scale shape mismatch".into()));
        }
        if self.data_mean.len() != self.dims.variates || self.data_std.len() != self.dims.variates {
            return Err(Error::Data(
                "bundle standardization statistics shape mismatch".into(),
            ));
        }
        if self.dims.history != self.config.history
            || self.dims.horizon != self.config.horizon
            || self.dims.steps_total != self.config.diffusion_steps
            || self.dims.hidden != self.config.denoiser.hidden
            || self.dims.step_embed != self.config.denoiser.step_embed
        {
            return Err(Error::Config(
                "config disagrees with the trained network dimensions".into(),
            ));
        }
        self.config.validate()
    }

    /// Re-check internal consistency; for callers that mutate `config` after
    /// loading. Overrides touching the trained shape are rejected here.
    pub fn revalidate(&self) -> Result<()> {
        self.check()
    }

    pub fn denoiser(&self) -> Result<ReferenceDenoiser> {
        ReferenceDenoiser::from_parts(self.dims, self.theta.clone())
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        build_linear_beta(
            self.config.diffusion_steps,
            self.config.beta_start,
            self.config.beta_end,
        )
    }

    pub fn inference_schedule(&self) -> Result<InferenceSchedule> {
        build_cosine_kappa(self.config.diffusion_steps, self.config.inference_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn toy_bundle() -> ModelBundle {
        let mut config = RunConfig {
            history: 4,
            horizon: 2,
            diffusion_steps: 10,
            inference_steps: 3,
            ..RunConfig::default()
        };
        config.denoiser.hidden = 3;
        config.denoiser.step_embed = 2;
        let dims = NetDims {
            history: 4,
            horizon: 2,
            variates: 1,
            hidden: 3,
            step_embed: 2,
            steps_total: 10,
        };
        ModelBundle {
            format: BUNDLE_FORMAT,
            config,
            dims,
            point: PointEstimator::SeasonalNaive { period: 4 },
            sigma_trn: Array2::from_elem((2, 1), 0.5),
            theta: vec![0.25; dims.param_len()],
            train_log: vec![EpochLoss {
                epoch: 0,
                train: 1.0,
                val: None,
            }],
            data_mean: vec![0.0],
            data_std: vec![1.0],
            variate_names: vec!["v0".into()],
            calibration: None,
        }
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        let bundle = toy_bundle();
        bundle.save(&p1).unwrap();
        let loaded = ModelBundle::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn corrupt_weight_length_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut bundle = toy_bundle();
        bundle.theta.pop();
        bundle.save(&path).unwrap();
        assert!(ModelBundle::load(&path).is_err());
    }

    #[test]
    fn format_version_is_enforced() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("future.json");
        let mut bundle = toy_bundle();
        bundle.format = 999;
        bundle.save(&path).unwrap();
        assert!(ModelBundle::load(&path).is_err());
    }

    #[test]
    fn schedules_rebuild_from_config() {
        let bundle = toy_bundle();
        assert_eq!(bundle.schedule().unwrap().steps(), 10);
        assert_eq!(bundle.inference_schedule().unwrap().len(), 3);
        assert!(bundle.denoiser().is_ok());
    }
}
