//! End-to-end drivers wiring data, point estimation, residual diffusion and
//! distribution matching into the CLI verbs.

pub mod bundle;
pub mod config;
pub mod data;
pub mod run;
pub mod synth;

pub use bundle::{ModelBundle, BUNDLE_FORMAT};
pub use config::RunConfig;
pub use data::{Dataset, Split};
pub use run::{
    plot_data_csv, run_calibrate, run_evaluate, run_forecast, run_train, run_train_on, Arm,
    ArmReport, EvalOutput, ForecastOutput, TrajectoryRow,
};
pub use synth::{synth_generate, SynthKind};

/// Decimal text with nine significant digits; all emitted tables use this so
/// identical runs yield byte-identical files.
pub fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_width_significant_digits() {
        assert_eq!(fmt_sig9(1.0), "1.00000000e0");
        assert_eq!(fmt_sig9(-0.25), "-2.50000000e-1");
        assert_eq!(fmt_sig9(1234.56789), "1.23456789e3");
    }
}
