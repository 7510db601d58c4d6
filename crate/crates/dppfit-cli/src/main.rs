//! `dppfit` command line interface.
//!
//! Subcommands: `simulate` (write pattern CSVs + sidecars), `fit` (fit one
//! pattern, print/write the result JSON), `study` (replicated RMSE study),
//! `check` (quick numerical self-checks).
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure. Errors
//! go to stderr as one JSON object per failure.

use clap::{Parser, Subcommand};
use dppfit::inference::{
    fit_simultaneous, fit_two_step, CorrelationFamily, FitConfig, IntensityForm, ModelFamily,
    TestFunction,
};
use dppfit::io;
use dppfit::kernels::{CorrelationModel, IntensityModel, KernelModel};
use dppfit::numerics::rng::SeedSpec;
use dppfit::numerics::window::Window;
use dppfit::study::{h_limit_check, replicate_seed, run_study, StudyCell, StudyConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dppfit", version, about = "Determinantal point processes: simulation, adaptive estimating-function fits, replication studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate patterns from a model config and write CSV + JSON sidecars.
    Simulate {
        /// JSON config (see `SimulateConfig` in the README).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for pattern files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model to one pattern CSV.
    Fit {
        /// Pattern CSV (sidecar JSON supplies the window).
        #[arg(long)]
        pattern: PathBuf,
        /// Model family: bessel | gaussian, optionally with an intensity
        /// form, e.g. "bessel", "bessel:loglinear2", "gaussian:homogeneous".
        #[arg(long)]
        model: String,
        /// Test function: "truncated:R=0.1" or "adaptive:eps=0.01".
        #[arg(long)]
        method: String,
        /// two-step | simultaneous
        #[arg(long, default_value = "two-step")]
        layout: String,
        /// Optional path for the fit-result JSON (stdout summary always).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replicated simulation study from a JSON config.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: env DPPFIT_JOBS, else all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the built-in numerical self-checks and print pass/fail lines.
    Check,
}

/// Config schema of `simulate`.
#[derive(Debug, Deserialize)]
struct SimulateConfig {
    window: Window,
    cell: StudyCell,
    replicates: u64,
    master_seed: u64,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn emit(&self) -> ExitCode {
        let (kind, message, code) = match self {
            CliError::Validation(m) => ("validation", m, 1),
            CliError::Numerical(m) => ("numerical", m, 2),
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": { "kind": kind, "message": message } })
        );
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.emit(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Fit { pattern, model, method, layout, out } => {
            fit(&pattern, &model, &method, &layout, out.as_deref())
        }
        Command::Study { config, out, jobs } => study(&config, &out, jobs),
        Command::Check => check(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("cannot parse {}: {e}", path.display())))
}

fn simulate(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let config: SimulateConfig = read_json(config_path)?;
    let model = config.cell.model();
    let margin = model.existence_margin(&config.window);
    if margin > 1.0 {
        return Err(CliError::Validation(format!(
            "no DPP exists for this cell (existence margin {margin:.4} > 1)"
        )));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", out_dir.display())))?;
    for rep in 0..config.replicates {
        let seed = SeedSpec::new(config.master_seed, rep);
        let pattern = dppfit::sampler::sample_dpp(&model, &config.window, seed)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let stem = out_dir.join(format!("pattern_{rep:04}"));
        let sidecar = io::PatternSidecar {
            window: config.window,
            model: Some(model.clone()),
            seed: Some(seed),
        };
        io::write_pattern(&stem, &pattern, &sidecar)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        println!("wrote {} ({} points)", stem.with_extension("csv").display(), pattern.len());
    }
    Ok(())
}

fn parse_model(spec: &str) -> Result<ModelFamily, CliError> {
    let mut parts = spec.splitn(2, ':');
    let family = match parts.next().unwrap_or_default() {
        "bessel" => CorrelationFamily::BesselType,
        "gaussian" => CorrelationFamily::Gaussian,
        other => {
            return Err(CliError::Validation(format!(
                "unknown correlation family '{other}' (expected bessel | gaussian)"
            )))
        }
    };
    let intensity = match parts.next() {
        None | Some("homogeneous") => IntensityForm::Homogeneous,
        Some("loglinear1") => IntensityForm::LogLinear { ncoef: 1 },
        Some("loglinear2") => IntensityForm::LogLinear { ncoef: 2 },
        Some("loglinear3") => IntensityForm::LogLinear { ncoef: 3 },
        Some(other) => {
            return Err(CliError::Validation(format!(
                "unknown intensity form '{other}' (expected homogeneous | loglinear1..3)"
            )))
        }
    };
    Ok(ModelFamily { intensity, correlation: family })
}

fn parse_method(spec: &str) -> Result<TestFunction, CliError> {
    let bad = || {
        CliError::Validation(format!(
            "cannot parse method '{spec}' (expected truncated:R=<r> or adaptive:eps=<e>)"
        ))
    };
    let mut parts = spec.splitn(2, ':');
    match (parts.next(), parts.next()) {
        (Some("truncated"), Some(rest)) => {
            let r = rest.strip_prefix("R=").ok_or_else(bad)?;
            Ok(TestFunction::Truncated { r: r.parse().map_err(|_| bad())? })
        }
        (Some("adaptive"), Some(rest)) => {
            let eps = rest.strip_prefix("eps=").ok_or_else(bad)?;
            let epsilon: f64 = eps.parse().map_err(|_| bad())?;
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(CliError::Validation(format!(
                    "epsilon must be in (0, 1), got {epsilon}"
                )));
            }
            Ok(TestFunction::Adaptive { epsilon })
        }
        _ => Err(bad()),
    }
}

fn fit(
    pattern_path: &Path,
    model_spec: &str,
    method_spec: &str,
    layout: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let family = parse_model(model_spec)?;
    let test_function = parse_method(method_spec)?;
    let pattern = io::read_pattern(pattern_path, None)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let config = FitConfig {
        compute_h: true,
        ..FitConfig::default()
    };
    let result = match layout {
        "two-step" => fit_two_step(&pattern, &family, &test_function, &config),
        "simultaneous" => {
            let eps = match test_function {
                TestFunction::Adaptive { epsilon } => epsilon,
                TestFunction::Truncated { .. } => {
                    return Err(CliError::Validation(
                        "the simultaneous layout uses the adaptive test function".into(),
                    ))
                }
            };
            fit_simultaneous(&pattern, &family, eps, &config)
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown layout '{other}' (expected two-step | simultaneous)"
            )))
        }
    }
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    let json = serde_json::to_string_pretty(&result)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    if let Some(path) = out {
        std::fs::write(path, &json)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    } else {
        println!("{json}");
    }
    println!(
        "fit: status {:?}, intensity {:?}, alpha {:.6}, range {:.4}, residual {:.2e} ({} evaluations)",
        result.status,
        result.intensity_params,
        result.alpha,
        result.practical_range,
        result.residual,
        result.iterations,
    );
    if !result.converged() {
        return Err(CliError::Numerical(format!(
            "fit did not converge (status {:?})",
            result.status
        )));
    }
    Ok(())
}

fn study(config_path: &Path, out_dir: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let config: StudyConfig = read_json(config_path)?;
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let jobs = jobs.or_else(|| {
        std::env::var("DPPFIT_JOBS").ok().and_then(|v| v.parse().ok())
    });
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", out_dir.display())))?;
    let report = match jobs {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            pool.install(|| run_study(&config))
        }
        _ => run_study(&config),
    }
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    let csv = io::report_to_csv(&report);
    let table = io::report_to_table(&report);
    std::fs::write(out_dir.join("report.csv"), &csv)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    std::fs::write(out_dir.join("report.txt"), &table)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Numerical(e.to_string()))?,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    print!("{table}");
    println!("wrote {}", out_dir.join("report.csv").display());
    Ok(())
}

/// Small deterministic self-checks: special functions, geometry, gradient
/// consistency, Campbell balance on a short sampler run.
fn check() -> Result<(), CliError> {
    let mut all_ok = true;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    // Bessel J1 against high-order quadrature of the integral form
    {
        let (xs, ws) = dppfit::numerics::gauss_legendre_1d(200);
        let j1_quad = |x: f64| -> f64 {
            // (1/pi) int_0^pi cos(theta - x sin theta) dtheta
            let mut acc = 0.0;
            for (&t, &w) in xs.iter().zip(&ws) {
                let theta = 0.5 * std::f64::consts::PI * (t + 1.0);
                acc += w * (theta - x * theta.sin()).cos();
            }
            acc * 0.5
        };
        let mut worst = 0.0f64;
        let mut x = -50.0;
        while x <= 50.0 {
            worst = worst.max((dppfit::numerics::bessel_j1(x) - j1_quad(x)).abs());
            x += 0.5;
        }
        report("bessel_j1 vs integral form", worst < 1e-12, format!("sup error {worst:.2e}"));
    }

    // distance CDF against Monte Carlo
    {
        let w = Window::unit();
        let mut rng = SeedSpec::new(2_024, 0).stream(dppfit::numerics::StreamLabel::Custom(50));
        use rand::Rng;
        let pairs = 200_000;
        let mut worst = 0.0f64;
        for r in [0.1, 0.25, 0.5, 1.0] {
            let mut hits = 0usize;
            for _ in 0..pairs {
                let dx = rng.random::<f64>() - rng.random::<f64>();
                let dy = rng.random::<f64>() - rng.random::<f64>();
                if (dx * dx + dy * dy).sqrt() <= r {
                    hits += 1;
                }
            }
            let emp = hits as f64 / pairs as f64;
            worst = worst.max((dppfit::numerics::distance_cdf(&w, r) - emp).abs());
        }
        report("distance_cdf vs Monte Carlo", worst < 5e-3, format!("sup error {worst:.2e}"));
    }

    // analytic alpha-gradients against central differences
    {
        let mut worst = 0.0f64;
        for family in [
            CorrelationModel::BesselType { alpha: 0.03 },
            CorrelationModel::Gaussian { alpha: 0.03 },
        ] {
            for i in 1..40 {
                let r = 0.005 * i as f64;
                let h = 1e-8;
                let fd = (family.with_alpha(0.03 + h).correlation(r)
                    - family.with_alpha(0.03 - h).correlation(r))
                    / (2.0 * h);
                let an = family.dcorrelation_dalpha(r);
                let rel = (an - fd).abs() / an.abs().max(1e-6);
                worst = worst.max(rel);
            }
        }
        report("correlation gradients vs finite differences", worst < 1e-5, format!("worst rel {worst:.2e}"));
    }

    // Campbell balance: mean of the pair sum over a short ensemble vs the
    // quadrature compensator at the truth
    {
        let w = Window::unit();
        let truth = KernelModel::new_unchecked(
            IntensityModel::Homogeneous { rho: 60.0 },
            CorrelationModel::BesselType { alpha: 0.04 },
        );
        let f = TestFunction::Adaptive { epsilon: 0.01 };
        let cfg = FitConfig::default();
        let reps = 120u64;
        let mut sums = Vec::new();
        for rep in 0..reps {
            let pattern =
                dppfit::sampler::sample_dpp(&truth, &w, replicate_seed(91, 0, rep))
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
            let (sum, integral) = dppfit::inference::stationary_e2_parts(
                &pattern,
                &truth.correlation,
                60.0,
                &f,
                &cfg.quad,
            )
            .map_err(|e| CliError::Numerical(e.to_string()))?;
            sums.push(sum - integral);
        }
        let mean = sums.iter().sum::<f64>() / reps as f64;
        let sd = (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64)
            .sqrt();
        let se = sd / (reps as f64).sqrt();
        report(
            "Campbell balance (estimating equation unbiased at truth)",
            mean.abs() < 3.0 * se,
            format!("mean {mean:.3} vs 3*SE {:.3}", 3.0 * se),
        );
    }

    // sensitivity limit sanity
    {
        let rep = h_limit_check(
            100.0,
            &CorrelationModel::BesselType { alpha: 0.05 },
            0.01,
            &[1.0, 2.0, 3.0],
            &FitConfig::default(),
        );
        let decreasing = rep.rows.windows(2).all(|p| p[1].rel_dev_h22 < p[0].rel_dev_h22);
        let last = rep.rows.last().unwrap().rel_dev_h22;
        report(
            "sensitivity window ladder approaches stationary limit",
            decreasing && last < 0.05,
            format!("deviations {:?}", rep.rows.iter().map(|r| r.rel_dev_h22).collect::<Vec<_>>()),
        );
    }

    if all_ok {
        Ok(())
    } else {
        Err(CliError::Numerical("one or more checks failed".into()))
    }
}
