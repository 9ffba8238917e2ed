//! Synthetic series generators for demos and end-to-end tests. Each variate
//! draws from its own RNG stream, so adding variates never changes earlier
//! ones.

use crate::error::{Error, Result};
use crate::pipeline::data::Dataset;
use crate::rng::{stream_rng, StreamId};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Ar1,
    SinusoidNoise,
    RandomWalk,
    Heteroscedastic,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ar1" => Ok(SynthKind::Ar1),
            "sinusoid_noise" => Ok(SynthKind::SinusoidNoise),
            "random_walk" => Ok(SynthKind::RandomWalk),
            "heteroscedastic" => Ok(SynthKind::Heteroscedastic),
            other => Err(Error::Config(format!(
                "unknown synthetic kind '{other}' (expected ar1, sinusoid_noise, random_walk \
                 or heteroscedastic)"
            ))),
        }
    }
}

impl SynthKind {
    /// Parameter names and defaults accepted by this generator.
    fn defaults(self) -> Vec<(&'static str, f64)> {
        match self {
            SynthKind::Ar1 => vec![("rho", 0.8), ("sigma", 1.0)],
            SynthKind::SinusoidNoise => {
                vec![("period", 24.0), ("amplitude", 1.0), ("noise_std", 0.1)]
            }
            SynthKind::RandomWalk => vec![("step_std", 1.0)],
            SynthKind::Heteroscedastic => vec![
                ("period", 24.0),
                ("amplitude", 2.0),
                ("base_noise", 0.3),
                ("mod_depth", 2.0),
                ("drift", 0.5),
            ],
        }
    }
}

/// Generate `rows x variates` values of `kind` under `seed`. `params`
/// overrides generator defaults; unknown names are rejected.
pub fn synth_generate(
    kind: SynthKind,
    rows: usize,
    variates: usize,
    seed: u64,
    params: &BTreeMap<String, f64>,
) -> Result<Dataset> {
    if rows < 3 {
        return Err(Error::Config(format!(
            "rows must be at least 3, got {rows}"
        )));
    }
    if variates == 0 {
        return Err(Error::Config("variates must be at least 1".into()));
    }
    let mut p: BTreeMap<&str, f64> = kind.defaults().into_iter().collect();
    for (name, value) in params {
        let slot = p
            .get_mut(name.as_str())
            .ok_or_else(|| Error::Config(format!("unknown parameter '{name}' for this kind")))?;
        *slot = *value;
    }
    for (name, value) in &p {
        let ok = match *name {
            "rho" => value.abs() < 1.0,
            "period" => *value >= 1.0,
            "sigma" | "noise_std" | "step_std" | "base_noise" | "mod_depth" | "drift" => {
                *value >= 0.0
            }
            "amplitude" => true,
            _ => true,
        };
        if !ok {
            return Err(Error::Config(format!(
                "parameter '{name}' = {value} out of range"
            )));
        }
    }

    let mut values = Array2::zeros((rows, variates));
    for j in 0..variates {
        let mut rng = stream_rng(seed, StreamId::Synth { variate: j as u64 });
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        match kind {
            SynthKind::Ar1 => {
                let (rho, sigma) = (p["rho"], p["sigma"]);
                let mut x = 0.0;
                for i in 0..rows {
                    x = rho * x + sigma * draw();
                    values[[i, j]] = x;
                }
            }
            SynthKind::RandomWalk => {
                let step = p["step_std"];
                let mut x = 0.0;
                for i in 0..rows {
                    x += step * draw();
                    values[[i, j]] = x;
                }
            }
            SynthKind::SinusoidNoise => {
                let (period, amp, noise) = (p["period"], p["amplitude"], p["noise_std"]);
                let phase = TAU * j as f64 / variates as f64;
                for i in 0..rows {
                    let angle = TAU * i as f64 / period + phase;
                    values[[i, j]] = amp * angle.sin() + noise * draw();
                }
            }
            SynthKind::Heteroscedastic => {
                // Noise level rides the seasonal phase and ramps up along the
                // series. Late splits are noisier than the span a model was
                // fitted on, which is the regime the coverage calibrator and
                // spread expansion exist to repair.
                let (period, amp, base, depth, drift) = (
                    p["period"],
                    p["amplitude"],
                    p["base_noise"],
                    p["mod_depth"],
                    p["drift"],
                );
                let phase = TAU * j as f64 / variates as f64;
                for i in 0..rows {
                    let angle = TAU * i as f64 / period + phase;
                    let ramp = 1.0 + drift * i as f64 / (rows - 1) as f64;
                    let vol = base * (1.0 + depth * (0.5 + 0.5 * angle.sin())) * ramp;
                    values[[i, j]] = amp * angle.sin() + vol * draw();
                }
            }
        }
    }
    let timestamps = (0..rows).map(|i| i.to_string()).collect();
    let names = (0..variates).map(|j| format!("v{j}")).collect();
    Dataset::from_values(timestamps, names, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, std_pop};

    fn gen(kind: SynthKind, rows: usize, d: usize, seed: u64) -> Dataset {
        synth_generate(kind, rows, d, seed, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn generation_is_deterministic_and_variate_stable() {
        let a = gen(SynthKind::Ar1, 200, 2, 5);
        let b = gen(SynthKind::Ar1, 200, 2, 5);
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // Adding a variate leaves existing columns untouched.
        let c = gen(SynthKind::Ar1, 200, 3, 5);
        for i in 0..200 {
            for j in 0..2 {
                assert_eq!(a.values[[i, j]].to_bits(), c.values[[i, j]].to_bits());
            }
        }
    }

    #[test]
    fn ar1_moments_are_plausible() {
        let ds = gen(SynthKind::Ar1, 20_000, 1, 7);
        let col: Vec<f64> = ds.values.column(0).to_vec();
        // Stationary std = sigma / sqrt(1 - rho^2) = 1 / sqrt(0.36) = 1.667.
        let sd = std_pop(&col);
        assert!((sd - 1.667).abs() < 0.1, "std {sd}");
        assert!(mean(&col).abs() < 0.1);
    }

    #[test]
    fn noiseless_sinusoid_is_exactly_periodic() {
        let mut params = BTreeMap::new();
        params.insert("noise_std".to_string(), 0.0);
        params.insert("period".to_string(), 12.0);
        let ds = synth_generate(SynthKind::SinusoidNoise, 120, 2, 1, &params).unwrap();
        for i in 0..108 {
            for j in 0..2 {
                assert!((ds.values[[i, j]] - ds.values[[i + 12, j]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn heteroscedastic_noise_tracks_the_phase() {
        let mut params = BTreeMap::new();
        params.insert("period".to_string(), 8.0);
        params.insert("drift".to_string(), 0.0);
        let ds = synth_generate(SynthKind::Heteroscedastic, 40_000, 1, 3, &params).unwrap();
        // Compare spread of the residual at peak phase (angle = pi/2, index
        // 2 mod 8) against trough phase (index 6 mod 8).
        let residual = |i: usize| {
            let angle = TAU * i as f64 / 8.0;
            ds.values[[i, 0]] - 2.0 * angle.sin()
        };
        let peak: Vec<f64> = (0..40_000).skip(2).step_by(8).map(residual).collect();
        let trough: Vec<f64> = (0..40_000).skip(6).step_by(8).map(residual).collect();
        // Volatility 0.3 * (1 + 2) = 0.9 at the peak vs 0.3 at the trough.
        assert!(
            (std_pop(&peak) - 0.9).abs() < 0.05,
            "peak {}",
            std_pop(&peak)
        );
        assert!(
            (std_pop(&trough) - 0.3).abs() < 0.05,
            "trough {}",
            std_pop(&trough)
        );
    }

    #[test]
    fn heteroscedastic_noise_grows_along_the_series() {
        let mut params = BTreeMap::new();
        params.insert("period".to_string(), 8.0);
        let ds = synth_generate(SynthKind::Heteroscedastic, 40_000, 1, 3, &params).unwrap();
        let residual = |i: usize| {
            let angle = TAU * i as f64 / 8.0;
            ds.values[[i, 0]] - 2.0 * angle.sin()
        };
        // Default drift 0.5 scales volatility by 1 + 0.5 t/(T-1). At fixed
        // peak phase the late-half/early-half std ratio is 1.375/1.125.
        let early: Vec<f64> = (0..20_000).skip(2).step_by(8).map(residual).collect();
        let late: Vec<f64> = (20_000..40_000).skip(2).step_by(8).map(residual).collect();
        let ratio = std_pop(&late) / std_pop(&early);
        assert!((ratio - 1.375 / 1.125).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn unknown_parameters_are_rejected() {
        let mut params = BTreeMap::new();
        params.insert("velocity".to_string(), 1.0);
        assert!(synth_generate(SynthKind::Ar1, 100, 1, 0, &params).is_err());
        let mut params = BTreeMap::new();
        params.insert("rho".to_string(), 1.5);
        assert!(synth_generate(SynthKind::Ar1, 100, 1, 0, &params).is_err());
    }

    #[test]
    fn kind_names_parse() {
        assert!("heteroscedastic".parse::<SynthKind>().is_ok());
        assert!("brownian".parse::<SynthKind>().is_err());
    }
}
