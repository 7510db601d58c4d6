//! Estimating-function inference for separable DPP models: test functions
//! with truncated or adaptive supports, block estimating equations,
//! two-step and simultaneous fits, sensitivity matrices, and sandwich
//! covariance / confidence-interval machinery.

pub mod covariance;
pub mod equations;
pub mod fit;
pub mod sensitivity;

pub use covariance::{
    empirical_sigma, estimator_covariance, ks_critical_001, ks_statistic_normal, normal_cdf,
    normal_ci, normal_quantile, CovarianceError,
};
pub use equations::{
    dg_dalpha, dlog_rho2_dalpha, poisson_score, second_order_equation, second_order_integral,
    second_order_parts, simultaneous_equation, simultaneous_rho, stationary_e2_parts,
    stationary_equation_e2, stationary_integral, test_function_value, weight_w, EquationError,
    GradientLayout, QuadConfig, TestFunction,
};
pub use fit::{
    fit_simultaneous, fit_two_step, CorrelationFamily, FitConfig, FitError, FitLayout, FitResult,
    FitStatus, IntensityForm, ModelFamily,
};
pub use sensitivity::{
    h11, sensitivity_simultaneous, sensitivity_two_step, stationary_pair_blocks,
    stationary_pair_limits,
};
