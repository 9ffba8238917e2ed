//! Command-line front end: synth, train, calibrate, evaluate, forecast.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric
//! failure.

use clap::{Args, Parser, Subcommand};
use diffcast::error::io_data;
use diffcast::pipeline::{
    fmt_sig9, plot_data_csv, run_calibrate, run_evaluate, run_forecast, run_train, Arm, Dataset,
    EvalOutput, ModelBundle, RunConfig,
};
use diffcast::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "diffcast",
    version,
    about = "Probabilistic time-series forecasting: point estimate plus diffusion-refined residual ensembles"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic benchmark series as CSV
    Synth(SynthArgs),
    /// Fit a model bundle on a CSV series
    Train(TrainArgs),
    /// Fit coverage multipliers on the validation split
    Calibrate(CalibrateArgs),
    /// Score the bundle on the test split
    Evaluate(EvaluateArgs),
    /// Write forecast ensembles for the test split
    Forecast(ForecastArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Generator kind: ar1, sinusoid_noise, random_walk, heteroscedastic
    #[arg(long)]
    kind: String,
    #[arg(long)]
    rows: usize,
    #[arg(long, default_value_t = 1)]
    variates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Generator parameter override, repeatable
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Key-value config file; omitted keys use defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV; overrides data.path from the config file
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config override, repeatable; wins over the config file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Train the point estimator and the denoiser jointly
    #[arg(long)]
    joint: bool,
    /// Where to write the model bundle
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Trained model bundle
    #[arg(long)]
    model: PathBuf,
    /// Series to calibrate on; defaults to the bundle's data.path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config override (for example samples=200), repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output bundle path; defaults to updating --model in place
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model bundle
    #[arg(long)]
    model: PathBuf,
    /// Series to score on; defaults to the bundle's data.path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config override (for example samples=200), repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Comma-separated arm list, or `all`
    #[arg(long, default_value = "all")]
    arms: String,
    /// Also score the partially denoised ensemble after every reverse jump
    #[arg(long)]
    trajectory: bool,
    /// Emit the report as JSON instead of flat key-value text
    #[arg(long)]
    json: bool,
    /// Write per-window interval series for plotting to this CSV
    #[arg(long = "plot-data", value_name = "PATH")]
    plot_data: Option<PathBuf>,
    /// Also write the report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ForecastArgs {
    /// Trained model bundle
    #[arg(long)]
    model: PathBuf,
    /// Series to forecast; defaults to the bundle's data.path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config override (for example samples=200), repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Where to write ensemble member rows
    #[arg(long, default_value = "forecast.csv")]
    out: PathBuf,
    /// Where to write per-cell summary statistics
    #[arg(long, default_value = "forecast_summary.csv")]
    summary_out: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                e.exit()
            }
            _ => {
                let _ = e.print();
                std::process::exit(1);
            }
        },
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Train(a) => train(a),
        Cmd::Calibrate(a) => calibrate(a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Forecast(a) => forecast(a),
    }
}

fn parse_kv(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::Config(format!("expected key=value, got '{s}'")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_data(&format!("{}", path.display()), e))
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind = a.kind.parse()?;
    let mut params = BTreeMap::new();
    for p in &a.params {
        let (k, v) = parse_kv(p)?;
        let value: f64 = v.parse().map_err(|_| {
            Error::Config(format!("parameter {k} needs a numeric value, got '{v}'"))
        })?;
        params.insert(k.to_string(), value);
    }
    let data = diffcast::pipeline::synth_generate(kind, a.rows, a.variates, a.seed, &params)?;
    data.write_csv(&a.out)?;
    println!(
        "wrote {} rows x {} variates to {}",
        data.rows(),
        data.variates(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &a.data {
        cfg.data_path = Some(d.display().to_string());
    }
    for s in &a.sets {
        let (k, v) = parse_kv(s)?;
        cfg.set(k, v)?;
    }
    if a.joint {
        cfg.joint = true;
    }
    let bundle = run_train(&cfg)?;
    bundle.save(&a.out)?;
    if let Some(last) = bundle.train_log.last() {
        match last.val {
            Some(v) => println!(
                "trained {} epochs, final loss {:.6} (val {:.6})",
                bundle.train_log.len(),
                last.train,
                v
            ),
            None => {
                println!(
                    "trained {} epochs, final loss {:.6}",
                    bundle.train_log.len(),
                    last.train
                )
            }
        }
    }
    println!("saved model bundle to {}", a.out.display());
    Ok(())
}

/// Load a bundle, apply config overrides, and open the series to work on.
/// Overrides that would disagree with the trained network are rejected.
fn load_bundle_and_data(
    model: &Path,
    data: Option<&Path>,
    sets: &[String],
) -> Result<(ModelBundle, Dataset)> {
    let mut bundle = ModelBundle::load(model)?;
    for s in sets {
        let (k, v) = parse_kv(s)?;
        bundle.config.set(k, v)?;
    }
    bundle.revalidate()?;
    let path = match data {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(bundle.config.data_path.as_deref().ok_or_else(|| {
            Error::Config("no --data given and the bundle records no data.path".into())
        })?),
    };
    let dataset = Dataset::load_csv(&path)?;
    Ok((bundle, dataset))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let (mut bundle, data) = load_bundle_and_data(&a.model, a.data.as_deref(), &a.sets)?;
    let warnings = run_calibrate(&mut bundle, &data)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let out = a.out.unwrap_or(a.model);
    bundle.save(&out)?;
    let shells = bundle.calibration.as_ref().map_or(0, |p| p.lambda.len());
    println!(
        "fitted {shells} coverage shells; saved to {}",
        out.display()
    );
    Ok(())
}

fn parse_arms(s: &str, calibrated: bool) -> Result<Vec<Arm>> {
    if s == "all" {
        return Ok(Arm::defaults(calibrated));
    }
    s.split(',').map(|t| t.trim().parse::<Arm>()).collect()
}

fn flat_report(out: &EvalOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "windows = {}", out.windows);
    let _ = writeln!(s, "samples = {}", out.samples);
    for rep in &out.arms {
        let a = &rep.arm;
        let m = &rep.metrics;
        let _ = writeln!(s, "arm.{a}.samples = {}", rep.samples);
        let _ = writeln!(s, "arm.{a}.crps = {}", fmt_sig9(m.crps));
        let _ = writeln!(s, "arm.{a}.mae = {}", fmt_sig9(m.mae));
        let _ = writeln!(s, "arm.{a}.mse = {}", fmt_sig9(m.mse));
        for e in &m.picp {
            let pct = (e.gamma * 100.0).round() as u32;
            let _ = writeln!(s, "arm.{a}.picp{pct} = {}", fmt_sig9(e.value));
        }
        let _ = writeln!(s, "arm.{a}.picp_distance = {}", fmt_sig9(m.picp_distance));
        for h in &m.per_horizon {
            let _ = writeln!(s, "arm.{a}.step{}.crps = {}", h.step, fmt_sig9(h.crps));
            let _ = writeln!(s, "arm.{a}.step{}.mae = {}", h.step, fmt_sig9(h.mae));
            let _ = writeln!(s, "arm.{a}.step{}.mse = {}", h.step, fmt_sig9(h.mse));
        }
    }
    if let Some(rows) = &out.trajectory {
        for r in rows {
            let _ = writeln!(s, "trajectory.{}.kappa = {}", r.jumps, r.kappa);
            let _ = writeln!(s, "trajectory.{}.crps = {}", r.jumps, fmt_sig9(r.crps));
        }
    }
    s
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (bundle, data) = load_bundle_and_data(&a.model, a.data.as_deref(), &a.sets)?;
    let arms = parse_arms(&a.arms, bundle.calibration.is_some())?;
    let report = run_evaluate(&bundle, &data, &arms, a.trajectory)?;
    let text = if a.json {
        let mut t = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Data(format!("cannot serialize report: {e}")))?;
        t.push('\n');
        t
    } else {
        flat_report(&report)
    };
    print!("{text}");
    if let Some(p) = &a.out {
        write_file(p, &text)?;
    }
    if let Some(p) = &a.plot_data {
        write_file(p, &plot_data_csv(&bundle, &data)?)?;
    }
    Ok(())
}

fn forecast(a: ForecastArgs) -> Result<()> {
    let (bundle, data) = load_bundle_and_data(&a.model, a.data.as_deref(), &a.sets)?;
    let out = run_forecast(&bundle, &data)?;
    write_file(&a.out, &out.samples_csv)?;
    write_file(&a.summary_out, &out.summary_csv)?;
    println!(
        "wrote {} forecast rows to {} and {} summary rows to {}",
        out.samples_csv.lines().count() - 1,
        a.out.display(),
        out.summary_csv.lines().count() - 1,
        a.summary_out.display()
    );
    Ok(())
}
