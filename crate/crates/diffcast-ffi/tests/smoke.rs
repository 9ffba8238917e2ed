//! Exercises the C surface from Rust: the full synth, train, open,
//! calibrate, evaluate, forecast flow plus the documented argument and
//! error-code contracts.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use diffcast_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn cstr(p: *const c_char) -> String {
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn last_error() -> String {
    cstr(dc_last_error())
}

const CONFIG: &str = "seed = 777\n\
                      window.history = 8\n\
                      window.horizon = 4\n\
                      diffusion.steps = 30\n\
                      inference.steps = 5\n\
                      samples = 20\n\
                      denoiser.hidden = 16\n\
                      denoiser.step_embed = 8\n\
                      denoiser.epochs = 20\n\
                      denoiser.batch = 16\n\
                      point.epochs = 60\n\
                      point.patience = 10\n";

#[test]
fn full_flow_through_the_c_surface() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| c(dir.path().join(name).to_str().unwrap());
    let data = path("series.csv");
    let bundle = path("model.json");

    unsafe {
        let status = dc_synth_csv(
            c("ar1").as_ptr(),
            240,
            2,
            777,
            c("rho=0.8, sigma=1.0").as_ptr(),
            data.as_ptr(),
        );
        assert_eq!(status, DcStatus::Ok, "{}", last_error());

        let status = dc_train(c(CONFIG).as_ptr(), data.as_ptr(), bundle.as_ptr());
        assert_eq!(status, DcStatus::Ok, "{}", last_error());

        let mut model: *mut DcModel = ptr::null_mut();
        assert_eq!(dc_model_open(bundle.as_ptr(), &mut model), DcStatus::Ok);
        assert!(!model.is_null());

        let mut n = 0usize;
        assert_eq!(dc_model_history(model, &mut n), DcStatus::Ok);
        assert_eq!(n, 8);
        assert_eq!(dc_model_horizon(model, &mut n), DcStatus::Ok);
        assert_eq!(n, 4);
        assert_eq!(dc_model_variates(model, &mut n), DcStatus::Ok);
        assert_eq!(n, 2);

        let mut calibrated = -1;
        assert_eq!(dc_model_is_calibrated(model, &mut calibrated), DcStatus::Ok);
        assert_eq!(calibrated, 0);

        // The coverage arm refuses to run before calibration.
        let mut json: *mut c_char = ptr::null_mut();
        let status = dc_evaluate_json(
            model,
            data.as_ptr(),
            c("ddim_eae_co").as_ptr(),
            0,
            &mut json,
        );
        assert_eq!(status, DcStatus::Config);
        assert!(
            last_error().contains("run calibrate first"),
            "{}",
            last_error()
        );

        assert_eq!(
            dc_calibrate(model, data.as_ptr()),
            DcStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(dc_model_is_calibrated(model, &mut calibrated), DcStatus::Ok);
        assert_eq!(calibrated, 1);
        assert_eq!(dc_model_save(model, bundle.as_ptr()), DcStatus::Ok);

        let status = dc_evaluate_json(model, data.as_ptr(), ptr::null(), 1, &mut json);
        assert_eq!(status, DcStatus::Ok, "{}", last_error());
        let report: serde_json::Value = serde_json::from_str(&cstr(json)).unwrap();
        dc_string_free(json);
        assert_eq!(report["arms"].as_array().unwrap().len(), 6);
        assert!(report["trajectory"].as_array().unwrap().len() > 1);
        assert!(report["windows"].as_u64().unwrap() > 0);

        let members = path("forecast.csv");
        let summary = path("summary.csv");
        let status = dc_forecast_csv(model, data.as_ptr(), members.as_ptr(), summary.as_ptr());
        assert_eq!(status, DcStatus::Ok, "{}", last_error());
        for f in ["forecast.csv", "summary.csv"] {
            assert!(Path::new(dir.path()).join(f).metadata().unwrap().len() > 0);
        }

        dc_model_close(model);
    }
}

#[test]
fn reopened_bundle_reports_the_same_dims() {
    let dir = tempfile::tempdir().unwrap();
    let data = c(dir.path().join("series.csv").to_str().unwrap());
    let bundle = c(dir.path().join("model.json").to_str().unwrap());
    unsafe {
        assert_eq!(
            dc_synth_csv(c("ar1").as_ptr(), 240, 1, 3, ptr::null(), data.as_ptr()),
            DcStatus::Ok
        );
        assert_eq!(
            dc_train(c(CONFIG).as_ptr(), data.as_ptr(), bundle.as_ptr()),
            DcStatus::Ok
        );
        let mut model: *mut DcModel = ptr::null_mut();
        assert_eq!(dc_model_open(bundle.as_ptr(), &mut model), DcStatus::Ok);
        let mut d = 0usize;
        assert_eq!(dc_model_variates(model, &mut d), DcStatus::Ok);
        assert_eq!(d, 1);
        dc_model_close(model);
    }
}

#[test]
fn scoring_helpers_match_the_library() {
    unsafe {
        let mut out = f64::NAN;
        let samples = [0.3, -1.2, 0.8, 2.0, 0.1];
        assert_eq!(
            dc_crps_empirical(samples.as_ptr(), samples.len(), 0.5, &mut out),
            DcStatus::Ok
        );
        assert_eq!(out, diffcast::metrics::crps_empirical(&samples, 0.5));

        // Point mass scores exactly its absolute error.
        let flat = [1.25; 4];
        assert_eq!(
            dc_crps_empirical(flat.as_ptr(), flat.len(), 2.0, &mut out),
            DcStatus::Ok
        );
        assert_eq!(out, 0.75);

        assert_eq!(dc_crps_gaussian(0.4, 1.3, 1.0, &mut out), DcStatus::Ok);
        assert_eq!(out, diffcast::metrics::crps_gaussian(0.4, 1.3, 1.0));
    }
}

#[test]
fn argument_faults_map_to_the_documented_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = c(dir.path().join("absent.json").to_str().unwrap());
    unsafe {
        let mut model: *mut DcModel = ptr::null_mut();
        assert_eq!(dc_model_open(ptr::null(), &mut model), DcStatus::NullArg);
        assert_eq!(
            dc_model_open(missing.as_ptr(), ptr::null_mut()),
            DcStatus::NullArg
        );
        assert_eq!(dc_model_open(missing.as_ptr(), &mut model), DcStatus::Data);
        assert!(!last_error().is_empty());

        // Invalid UTF-8 in a string argument.
        let bad = b"\xff\xfe\0";
        assert_eq!(
            dc_model_open(bad.as_ptr() as *const c_char, &mut model),
            DcStatus::Utf8
        );

        let out_csv = c(dir.path().join("x.csv").to_str().unwrap());
        assert_eq!(
            dc_synth_csv(
                c("fourier").as_ptr(),
                100,
                1,
                0,
                ptr::null(),
                out_csv.as_ptr()
            ),
            DcStatus::Config
        );
        assert!(last_error().contains("unknown synthetic kind"));
        assert_eq!(
            dc_synth_csv(
                c("ar1").as_ptr(),
                100,
                1,
                0,
                c("rho").as_ptr(),
                out_csv.as_ptr()
            ),
            DcStatus::Config
        );

        let mut out = 0.0f64;
        assert_eq!(
            dc_crps_empirical(ptr::null(), 3, 0.0, &mut out),
            DcStatus::NullArg
        );
        let samples = [1.0, 2.0];
        assert_eq!(
            dc_crps_empirical(samples.as_ptr(), 0, 0.0, &mut out),
            DcStatus::Config
        );
        let with_nan = [1.0, f64::NAN];
        assert_eq!(
            dc_crps_empirical(with_nan.as_ptr(), with_nan.len(), 0.0, &mut out),
            DcStatus::Numeric
        );
        assert_eq!(
            dc_crps_gaussian(0.0, -1.0, 0.0, &mut out),
            DcStatus::Numeric
        );

        // Training on a file that is not a series is a data fault.
        let not_csv = dir.path().join("junk.csv");
        std::fs::write(&not_csv, "hello\nworld\n").unwrap();
        let junk = c(not_csv.to_str().unwrap());
        let bundle = c(dir.path().join("m.json").to_str().unwrap());
        assert_eq!(
            dc_train(c(CONFIG).as_ptr(), junk.as_ptr(), bundle.as_ptr()),
            DcStatus::Data
        );

        // Harmless no-ops.
        dc_model_close(ptr::null_mut());
        dc_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_static_string() {
    let v = cstr(dc_version());
    assert!(!v.is_empty());
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
