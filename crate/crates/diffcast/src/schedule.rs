//! Noise schedule for the residual corruption process and the strided step
//! subset used at inference.
//!
//! Steps are 1-based: `k` in `1..=K`. Index 0 stands for the clean state and
//! `alpha_bar(0) == 1` by convention, which the sampler relies on for its
//! final step.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Corruption schedule: per-step noise rates and their running products.
#[derive(Debug, Clone)]
pub struct DiffusionSchedule {
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    /// Total number of corruption steps K.
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    /// `beta_k`, `k` in `1..=K`.
    pub fn beta(&self, k: usize) -> f64 {
        assert!(
            k >= 1 && k <= self.steps(),
            "step {k} outside 1..={}",
            self.steps()
        );
        self.beta[k - 1]
    }

    /// Cumulative signal fraction `alpha_bar_k`, with `alpha_bar_0 == 1`.
    pub fn alpha_bar(&self, k: usize) -> f64 {
        assert!(k <= self.steps(), "step {k} outside 0..={}", self.steps());
        if k == 0 {
            1.0
        } else {
            self.alpha_bar[k - 1]
        }
    }
}

/// Evenly spaced noise rates from `beta_start` to `beta_end` over `k` steps.
///
/// `alpha_bar` is accumulated left to right in one pass; it is strictly
/// decreasing and stays in (0, 1) for any valid parameters.
pub fn build_linear_beta(k: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule> {
    if k == 0 {
        return Err(Error::Config("diffusion_steps must be at least 1".into()));
    }
    if !(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end) {
        return Err(Error::Config(format!(
            "beta range must satisfy 0 < start <= end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let mut beta = Vec::with_capacity(k);
    let mut alpha_bar = Vec::with_capacity(k);
    let mut prod = 1.0;
    for i in 0..k {
        let frac = if k == 1 {
            0.0
        } else {
            i as f64 / (k - 1) as f64
        };
        let b = beta_start + (beta_end - beta_start) * frac;
        prod *= 1.0 - b;
        beta.push(b);
        alpha_bar.push(prod);
    }
    Ok(DiffusionSchedule { beta, alpha_bar })
}

/// Strided subset of corruption steps visited by the sampler, ascending,
/// ending exactly at K.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceSchedule {
    kappa: Vec<usize>,
}

impl InferenceSchedule {
    /// Number of sampler steps W.
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// `kappa_i`, `i` in `1..=W`. `kappa(0) == 0` denotes the clean state.
    pub fn kappa(&self, i: usize) -> usize {
        assert!(i <= self.len(), "index {i} outside 0..={}", self.len());
        if i == 0 {
            0
        } else {
            self.kappa[i - 1]
        }
    }

    pub fn steps(&self) -> &[usize] {
        &self.kappa
    }

    /// Single-step schedule {K}: one jump from pure noise to the clean state.
    pub fn single_step(k: usize) -> InferenceSchedule {
        InferenceSchedule { kappa: vec![k] }
    }
}

/// Cosine-spaced subset of `1..=K` with `w` entries.
///
/// Raw positions `round(K * (1 - cos(i*pi/(2w))))` cluster steps near the
/// clean end where the posterior changes fastest. Rounding can create ties
/// or zeros, so a forward pass enforces strict increase, the last entry is
/// pinned to K, and a backward pass restores strict increase below it.
/// Requires `1 <= w <= k`; the result is then guaranteed valid.
pub fn build_cosine_kappa(k: usize, w: usize) -> Result<InferenceSchedule> {
    if w == 0 {
        return Err(Error::Config(
            "inference_diffusion_steps must be at least 1".into(),
        ));
    }
    if w > k {
        return Err(Error::Config(format!(
            "inference_diffusion_steps ({w}) cannot exceed diffusion_steps ({k})"
        )));
    }
    let mut kappa = Vec::with_capacity(w);
    let mut prev: usize = 0;
    for i in 1..=w {
        let angle = i as f64 * std::f64::consts::PI / (2.0 * w as f64);
        let raw = (k as f64 * (1.0 - angle.cos())).round() as usize;
        let step = raw.max(prev + 1);
        kappa.push(step);
        prev = step;
    }
    kappa[w - 1] = k;
    for i in (0..w.saturating_sub(1)).rev() {
        if kappa[i] >= kappa[i + 1] {
            kappa[i] = kappa[i + 1] - 1;
        }
    }
    Ok(InferenceSchedule { kappa })
}

#[cfg(test)]
// Reference values keep their full frozen digit strings.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Cross-checked against a 50-digit arbitrary-precision computation.
    #[test]
    fn linear_beta_reference_values() {
        let s = build_linear_beta(1000, 1e-4, 0.02).unwrap();
        assert_eq!(s.steps(), 1000);
        assert_eq!(s.alpha_bar(0), 1.0);
        assert_relative_eq!(s.alpha_bar(1), 0.9999, max_relative = 1e-13);
        assert_relative_eq!(s.alpha_bar(2), 0.99978009207207207, max_relative = 1e-13);
        assert_relative_eq!(s.alpha_bar(10), 0.99810520478583462, max_relative = 1e-13);
        assert_relative_eq!(s.alpha_bar(100), 0.89701814567496036, max_relative = 1e-13);
        assert_relative_eq!(s.alpha_bar(500), 0.078587242881778237, max_relative = 1e-13);
        assert_relative_eq!(
            s.alpha_bar(999),
            4.1181936381384524e-5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            s.alpha_bar(1000),
            4.0358297653756833e-5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn linear_beta_tiny_schedules() {
        let s = build_linear_beta(2, 0.1, 0.3).unwrap();
        assert_relative_eq!(s.alpha_bar(1), 0.9, max_relative = 1e-15);
        assert_relative_eq!(s.alpha_bar(2), 0.63, max_relative = 1e-15);
        let s1 = build_linear_beta(1, 0.5, 0.5).unwrap();
        assert_relative_eq!(s1.alpha_bar(1), 0.5, max_relative = 1e-15);
        assert_eq!(s1.beta(1), 0.5);
    }

    #[test]
    fn linear_beta_rejects_bad_ranges() {
        assert!(build_linear_beta(0, 1e-4, 0.02).is_err());
        assert!(build_linear_beta(10, 0.0, 0.02).is_err());
        assert!(build_linear_beta(10, 0.3, 0.1).is_err());
        assert!(build_linear_beta(10, 0.5, 1.0).is_err());
    }

    #[test]
    fn alpha_bar_matches_direct_product() {
        let s = build_linear_beta(1000, 1e-4, 0.02).unwrap();
        let mut prod = 1.0;
        for k in 1..=1000 {
            prod *= 1.0 - s.beta(k);
            assert_relative_eq!(s.alpha_bar(k), prod, max_relative = 1e-12);
            assert!(s.alpha_bar(k) > 0.0 && s.alpha_bar(k) < s.alpha_bar(k - 1));
        }
    }

    #[test]
    fn cosine_kappa_reference_values() {
        let cases: &[(usize, usize, &[usize])] = &[
            (10, 10, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]),
            (1000, 1, &[1000]),
            (1000, 10, &[12, 49, 109, 191, 293, 412, 546, 691, 844, 1000]),
            (50, 10, &[1, 2, 5, 10, 15, 21, 27, 35, 42, 50]),
            (100, 10, &[1, 5, 11, 19, 29, 41, 55, 69, 84, 100]),
            // 7*(1-cos(pi/3)) is an exact 3.5 tie in real arithmetic but
            // lands at 3.4999999999999996 in f64; the double-precision value
            // is the contract here.
            (7, 3, &[1, 3, 7]),
        ];
        for (k, w, want) in cases {
            let got = build_cosine_kappa(*k, *w).unwrap();
            assert_eq!(got.steps(), *want, "kappa({k}, {w})");
        }
    }

    #[test]
    fn kappa_zero_is_clean_state() {
        let s = build_cosine_kappa(100, 4).unwrap();
        assert_eq!(s.kappa(0), 0);
        assert_eq!(s.kappa(s.len()), 100);
    }

    #[test]
    fn cosine_kappa_rejects_bad_dims() {
        assert!(build_cosine_kappa(10, 0).is_err());
        assert!(build_cosine_kappa(10, 11).is_err());
    }

    #[test]
    fn single_step_is_k() {
        let s = InferenceSchedule::single_step(1000);
        assert_eq!(s.steps(), &[1000]);
    }

    proptest! {
        // Validity across the whole parameter plane: strictly increasing,
        // within bounds, last element exactly K.
        #[test]
        fn cosine_kappa_always_valid(k in 1usize..=2000, w_frac in 0.0f64..=1.0) {
            let w = 1 + ((k - 1) as f64 * w_frac) as usize;
            let s = build_cosine_kappa(k, w).unwrap();
            let steps = s.steps();
            prop_assert_eq!(steps.len(), w);
            prop_assert!(steps[0] >= 1);
            prop_assert_eq!(steps[w - 1], k);
            for i in 1..w {
                prop_assert!(steps[i] > steps[i - 1]);
            }
        }

        #[test]
        fn alpha_bar_monotone_any_range(
            k in 1usize..=500,
            start in 1e-6f64..0.1,
            spread in 0.0f64..0.5,
        ) {
            let end = (start + spread).min(0.999);
            let s = build_linear_beta(k, start, end).unwrap();
            for step in 1..=k {
                prop_assert!(s.alpha_bar(step) < s.alpha_bar(step - 1));
                prop_assert!(s.alpha_bar(step) > 0.0);
            }
        }
    }
}
