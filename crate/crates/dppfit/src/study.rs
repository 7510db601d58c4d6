//! Replicated simulation studies: sample, fit with every configured
//! method, and summarise RMSE / bias / timing per (cell, method).
//!
//! Statistics follow the usual replication-table conventions: they are
//! computed only over replicates where *all* compared methods converged,
//! RMSEs are reported with a delta-method standard error, and the RMSE
//! column is scaled by 1e3 in the rendered table. Replicate seeds derive
//! from (master seed, cell index, replicate index), so the statistical
//! content of a report is reproducible for any worker count; wall times
//! are the only non-deterministic fields.

use crate::inference::sensitivity::{stationary_pair_blocks, stationary_pair_limits};
use crate::inference::{
    empirical_sigma, estimator_covariance, fit_simultaneous, fit_two_step, normal_ci,
    stationary_e2_parts, FitConfig, FitLayout, FitResult, TestFunction,
};
use crate::kernels::{CorrelationModel, IntensityModel, KernelModel, PointPattern};
use crate::numerics::rng::SeedSpec;
use crate::numerics::window::Window;
use crate::sampler::sample_dpp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("config validation: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
}

/// One parameter cell of the study grid: the true model to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub intensity: IntensityModel,
    pub correlation: CorrelationModel,
}

impl StudyCell {
    pub fn model(&self) -> KernelModel {
        KernelModel::new_unchecked(self.intensity.clone(), self.correlation)
    }

    pub fn label(&self) -> String {
        let rho = match &self.intensity {
            IntensityModel::Homogeneous { rho } => format!("rho={rho}"),
            IntensityModel::LogLinear { beta } => format!("loglinear{beta:?}"),
        };
        format!("{rho},alpha={}", self.correlation.alpha())
    }

    fn family(&self) -> crate::inference::ModelFamily {
        crate::inference::ModelFamily {
            intensity: match &self.intensity {
                IntensityModel::Homogeneous { .. } => crate::inference::IntensityForm::Homogeneous,
                IntensityModel::LogLinear { beta } => {
                    crate::inference::IntensityForm::LogLinear { ncoef: beta.len() }
                }
            },
            correlation: match &self.correlation {
                CorrelationModel::BesselType { .. } => {
                    crate::inference::CorrelationFamily::BesselType
                }
                CorrelationModel::Gaussian { .. } => crate::inference::CorrelationFamily::Gaussian,
            },
        }
    }
}

/// An estimation method: a test function and the fitting layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub test_function: TestFunction,
    #[serde(default = "default_layout")]
    pub layout: FitLayout,
}

fn default_layout() -> FitLayout {
    FitLayout::TwoStep
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self.layout {
            FitLayout::TwoStep => self.test_function.label(),
            FitLayout::Simultaneous => format!("simultaneous:{}", self.test_function.label()),
        }
    }
}

/// Study configuration; the JSON schema of the CLI `study` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub window: Window,
    pub cells: Vec<StudyCell>,
    pub methods: Vec<MethodSpec>,
    pub replicates: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_version() -> u32 {
    1
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.version != 1 {
            return Err(StudyError::Invalid(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        if self.replicates < 1 {
            return Err(StudyError::Invalid("replicates must be >= 1".into()));
        }
        if self.cells.is_empty() || self.methods.is_empty() {
            return Err(StudyError::Invalid(
                "cells and methods must be non-empty".into(),
            ));
        }
        for cell in &self.cells {
            let margin = cell.model().existence_margin(&self.window);
            if margin > 1.0 {
                return Err(StudyError::Invalid(format!(
                    "cell {} violates existence (margin {margin:.4})",
                    cell.label()
                )));
            }
        }
        Ok(())
    }
}

/// Raw outcome of one (replicate, method) fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub n_points: usize,
    pub alpha_hat: f64,
    pub converged: bool,
    pub seconds: f64,
    pub practical_range: f64,
}

/// Summary for one method on one cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    /// sqrt(mean squared error) of alpha over co-converged replicates.
    pub rmse: f64,
    /// Delta-method standard error of the RMSE estimate.
    pub rmse_se: f64,
    pub bias: f64,
    pub mean_seconds: f64,
    /// Converged fraction over all replicates (before co-convergence).
    pub convergence_fraction: f64,
    /// Mean/SD of the practical range at the estimate (the fixed R for
    /// truncated weights).
    pub range_mean: f64,
    pub range_sd: f64,
}

/// Per-cell section of a study report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: StudyCell,
    pub alpha_true: f64,
    /// Practical range of the adaptive weight evaluated at the truth.
    pub range_at_truth: f64,
    /// Replicates where every method converged.
    pub co_converged: usize,
    pub replicates: u64,
    pub methods: Vec<MethodStats>,
}

impl CellReport {
    pub fn method(&self, label: &str) -> Option<&MethodStats> {
        self.methods.iter().find(|m| m.method == label)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub cells: Vec<CellReport>,
}

/// Seed for one replicate of one cell. The cell index is folded into the
/// replicate word so streams never collide across the grid.
pub fn replicate_seed(master: u64, cell_index: usize, replicate: u64) -> SeedSpec {
    SeedSpec::new(master, ((cell_index as u64) << 40) | replicate)
}

/// Run the full study grid; replicates execute in parallel on the global
/// rayon pool (bound it with `rayon::ThreadPoolBuilder` for a fixed
/// worker count).
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, StudyError> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.cells.len());
    for (ci, cell) in config.cells.iter().enumerate() {
        let truth = cell.model();
        let family = cell.family();
        let outcomes: Vec<Vec<ReplicateOutcome>> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| {
                let seed = replicate_seed(config.master_seed, ci, rep);
                let pattern = sample_dpp(&truth, &config.window, seed)
                    .expect("validated cell must sample");
                config
                    .methods
                    .iter()
                    .map(|method| run_method(&pattern, &family, method, &config.fit, rep))
                    .collect()
            })
            .collect();
        cells.push(summarize_cell(cell, config, &outcomes));
    }
    Ok(StudyReport { cells })
}

fn run_method(
    pattern: &PointPattern,
    family: &crate::inference::ModelFamily,
    method: &MethodSpec,
    fit_config: &FitConfig,
    rep: u64,
) -> ReplicateOutcome {
    let t0 = std::time::Instant::now();
    let fit: Result<FitResult, _> = match method.layout {
        FitLayout::TwoStep => fit_two_step(pattern, family, &method.test_function, fit_config),
        FitLayout::Simultaneous => {
            let eps = match method.test_function {
                TestFunction::Adaptive { epsilon } => epsilon,
                TestFunction::Truncated { .. } => 0.01,
            };
            fit_simultaneous(pattern, family, eps, fit_config)
        }
    };
    let seconds = t0.elapsed().as_secs_f64();
    match fit {
        Ok(fit) => ReplicateOutcome {
            replicate: rep,
            n_points: pattern.len(),
            alpha_hat: fit.alpha,
            converged: fit.converged(),
            seconds,
            practical_range: fit.practical_range,
        },
        Err(_) => ReplicateOutcome {
            replicate: rep,
            n_points: pattern.len(),
            alpha_hat: f64::NAN,
            converged: false,
            seconds,
            practical_range: f64::NAN,
        },
    }
}

fn summarize_cell(
    cell: &StudyCell,
    config: &StudyConfig,
    outcomes: &[Vec<ReplicateOutcome>],
) -> CellReport {
    let alpha_true = cell.correlation.alpha();
    let co: Vec<usize> = (0..outcomes.len())
        .filter(|&rep| outcomes[rep].iter().all(|o| o.converged))
        .collect();
    let mut methods = Vec::with_capacity(config.methods.len());
    for (mi, method) in config.methods.iter().enumerate() {
        let errs: Vec<f64> = co
            .iter()
            .map(|&rep| outcomes[rep][mi].alpha_hat - alpha_true)
            .collect();
        let times: Vec<f64> = co.iter().map(|&rep| outcomes[rep][mi].seconds).collect();
        let ranges: Vec<f64> = co
            .iter()
            .map(|&rep| outcomes[rep][mi].practical_range)
            .collect();
        let n = errs.len() as f64;
        let (rmse, rmse_se, bias) = if errs.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let m2 = errs.iter().map(|e| e * e).sum::<f64>() / n;
            let m4 = errs.iter().map(|e| e.powi(4)).sum::<f64>() / n;
            let rmse = m2.sqrt();
            // delta method: Var(m2) = (m4 - m2^2)/n, d sqrt / d m2 = 1/(2 rmse)
            let se = if n > 1.0 && rmse > 0.0 {
                ((m4 - m2 * m2) / n).max(0.0).sqrt() / (2.0 * rmse)
            } else {
                f64::NAN
            };
            (rmse, se, errs.iter().sum::<f64>() / n)
        };
        let mean_seconds = if times.is_empty() {
            f64::NAN
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        };
        let (range_mean, range_sd) = if ranges.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mean = ranges.iter().sum::<f64>() / ranges.len() as f64;
            let var = if ranges.len() > 1 {
                ranges.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
                    / (ranges.len() - 1) as f64
            } else {
                0.0
            };
            (mean, var.sqrt())
        };
        let converged_any = outcomes.iter().filter(|reps| reps[mi].converged).count();
        methods.push(MethodStats {
            method: method.label(),
            rmse,
            rmse_se,
            bias,
            mean_seconds,
            convergence_fraction: converged_any as f64 / outcomes.len() as f64,
            range_mean,
            range_sd,
        });
    }
    let range_at_truth =
        TestFunction::Adaptive { epsilon: 0.01 }.support_radius(&cell.correlation);
    CellReport {
        cell: cell.clone(),
        alpha_true,
        range_at_truth,
        co_converged: co.len(),
        replicates: config.replicates,
        methods,
    }
}

/// Coverage and normality diagnostics for the two-step estimator on one
/// homogeneous cell: per-replicate equation values at the truth feed the
/// empirical variance, per-replicate sensitivity matrices the sandwich,
/// and truth-coverage of the 95% interval for alpha is counted.
pub struct CoverageStudy {
    pub coverage_alpha: f64,
    pub standardized_alpha: Vec<f64>,
    pub converged: usize,
}

pub fn coverage_study(
    cell: &StudyCell,
    window: &Window,
    replicates: u64,
    master_seed: u64,
    epsilon: f64,
    fit_config: &FitConfig,
) -> Result<CoverageStudy, StudyError> {
    let truth = cell.model();
    let rho_true = match cell.intensity {
        IntensityModel::Homogeneous { rho } => rho,
        _ => {
            return Err(StudyError::Invalid(
                "coverage study expects a homogeneous cell".into(),
            ))
        }
    };
    let alpha_true = cell.correlation.alpha();
    let f = TestFunction::Adaptive { epsilon };
    let family = cell.family();
    struct Rep {
        e_at_truth: Vec<f64>,
        fit: FitResult,
    }
    let area = window.area();
    let reps: Vec<Option<Rep>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(master_seed, 7, rep);
            let pattern = sample_dpp(&truth, window, seed).ok()?;
            // block equation values at the truth: (poisson score, e2)
            let s = pattern.len() as f64 / rho_true - area;
            let (sum, integral) =
                stationary_e2_parts(&pattern, &cell.correlation, rho_true, &f, &fit_config.quad)
                    .ok()?;
            let mut cfg = *fit_config;
            cfg.compute_h = true;
            let fit = fit_two_step(&pattern, &family, &f, &cfg).ok()?;
            Some(Rep {
                e_at_truth: vec![s, sum - integral],
                fit,
            })
        })
        .collect();
    let usable: Vec<&Rep> = reps
        .iter()
        .flatten()
        .filter(|r| r.fit.converged())
        .collect();
    let e_values: Vec<Vec<f64>> = usable.iter().map(|r| r.e_at_truth.clone()).collect();
    let sigma = empirical_sigma(&e_values)
        .map_err(|e| StudyError::Invalid(format!("covariance: {e}")))?;
    let mut covered = 0usize;
    let mut standardized = Vec::with_capacity(usable.len());
    for rep in &usable {
        let h = rep.fit.h_matrix.as_ref().expect("requested H");
        let Ok(cov) = estimator_covariance(h, &sigma, area) else {
            continue;
        };
        let center = [rep.fit.intensity_params[0], rep.fit.alpha];
        let ci = normal_ci(&center, &cov, 0.95);
        if ci[1].0 <= alpha_true && alpha_true <= ci[1].1 {
            covered += 1;
        }
        let sd = cov[(1, 1)].max(0.0).sqrt();
        if sd > 0.0 {
            standardized.push((rep.fit.alpha - alpha_true) / sd);
        }
    }
    Ok(CoverageStudy {
        coverage_alpha: covered as f64 / usable.len() as f64,
        standardized_alpha: standardized,
        converged: usable.len(),
    })
}

/// Finite-window sensitivity blocks against their stationary limits on a
/// ladder of growing windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HLimitRow {
    pub side: f64,
    pub h11: f64,
    pub h21: f64,
    pub h22: f64,
    pub rel_dev_h21: f64,
    pub rel_dev_h22: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HLimitReport {
    pub rows: Vec<HLimitRow>,
    pub limit_h21: f64,
    pub limit_h22: f64,
    /// `H11 = 1/rho`, exact for homogeneous intensities.
    pub h11_exact: f64,
}

pub fn h_limit_check(
    rho: f64,
    corr: &CorrelationModel,
    epsilon: f64,
    sides: &[f64],
    fit_config: &FitConfig,
) -> HLimitReport {
    let f = TestFunction::Adaptive { epsilon };
    let (l21, l22) = stationary_pair_limits(rho, corr, &f, &fit_config.quad);
    let rows = sides
        .iter()
        .map(|&side| {
            let w = Window::new(0.0, 0.0, side, side).expect("positive side");
            let (h21, h22) = stationary_pair_blocks(rho, corr, &f, &w, &fit_config.quad);
            HLimitRow {
                side,
                h11: 1.0 / rho,
                h21,
                h22,
                rel_dev_h21: ((h21 - l21) / l21).abs(),
                rel_dev_h22: ((h22 - l22) / l22).abs(),
            }
        })
        .collect();
    HLimitReport {
        rows,
        limit_h21: l21,
        limit_h22: l22,
        h11_exact: 1.0 / rho,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> StudyConfig {
        StudyConfig {
            version: 1,
            window: Window::unit(),
            cells: vec![StudyCell {
                intensity: IntensityModel::Homogeneous { rho: 50.0 },
                correlation: CorrelationModel::BesselType { alpha: 0.04 },
            }],
            methods: vec![
                MethodSpec {
                    test_function: TestFunction::Truncated { r: 0.1 },
                    layout: FitLayout::TwoStep,
                },
                MethodSpec {
                    test_function: TestFunction::Adaptive { epsilon: 0.01 },
                    layout: FitLayout::TwoStep,
                },
            ],
            replicates: 24,
            master_seed: 20_240_401,
            fit: FitConfig::default(),
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let mut c = small_config();
        c.replicates = 0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.cells[0].correlation = CorrelationModel::BesselType { alpha: 0.09 };
        assert!(c.validate().is_err(), "existence violation must be caught");
        let mut c = small_config();
        c.version = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let config = small_config();
        let report_a = {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            pool.install(|| run_study(&config).unwrap())
        };
        let report_b = {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
            pool.install(|| run_study(&config).unwrap())
        };
        for (ca, cb) in report_a.cells.iter().zip(&report_b.cells) {
            assert_eq!(ca.co_converged, cb.co_converged);
            for (ma, mb) in ca.methods.iter().zip(&cb.methods) {
                assert_eq!(ma.rmse.to_bits(), mb.rmse.to_bits(), "{}", ma.method);
                assert_eq!(ma.bias.to_bits(), mb.bias.to_bits());
                assert_eq!(ma.range_mean.to_bits(), mb.range_mean.to_bits());
            }
        }
    }

    #[test]
    fn rmse_bounds_bias_and_filter_shrinks_sample() {
        let config = small_config();
        let report = run_study(&config).unwrap();
        let cell = &report.cells[0];
        assert!(cell.co_converged <= config.replicates as usize);
        for m in &cell.methods {
            if m.rmse.is_finite() {
                assert!(m.rmse >= m.bias.abs() - 1e-15, "{}", m.method);
            }
            // co-convergence never increases a method's sample size
            let own_converged =
                (m.convergence_fraction * config.replicates as f64).round() as usize;
            assert!(cell.co_converged <= own_converged.max(cell.co_converged));
        }
        // truncated range is the fixed R
        let trunc = cell.method("truncated:R=0.1").unwrap();
        assert!((trunc.range_mean - 0.1).abs() < 1e-12);
        assert!(trunc.range_sd < 1e-12);
    }

    #[test]
    fn single_replicate_rmse_is_abs_error() {
        let mut config = small_config();
        config.replicates = 1;
        config.methods.truncate(1);
        let report = run_study(&config).unwrap();
        let m = &report.cells[0].methods[0];
        if report.cells[0].co_converged == 1 {
            assert!((m.rmse - m.bias.abs()).abs() < 1e-15);
            assert!(m.rmse_se.is_nan(), "SE undefined for one replicate");
        }
    }
}
