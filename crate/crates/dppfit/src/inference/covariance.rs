//! Sandwich covariance of estimating-function estimators, normal
//! confidence intervals, and the small statistical helpers the study
//! harness needs (normal CDF, Kolmogorov-Smirnov check).
//!
//! The variance of the equation is estimated empirically across
//! replicates; the plug-in expansion would need 6-8 dimensional joint
//! intensity quadratures.

use crate::numerics::linalg::{LinalgError, Matrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CovarianceError {
    #[error("need at least {min} replicates, got {got}")]
    TooFewReplicates { min: usize, got: usize },
    #[error("sensitivity matrix is singular")]
    SingularH(#[from] LinalgError),
}

pub const MIN_REPLICATES: usize = 30;

/// Empirical covariance of equation values across replicates (each row
/// one replicate, evaluated at a common parameter).
pub fn empirical_sigma(e_values: &[Vec<f64>]) -> Result<Matrix, CovarianceError> {
    let n = e_values.len();
    if n < MIN_REPLICATES {
        return Err(CovarianceError::TooFewReplicates { min: MIN_REPLICATES, got: n });
    }
    let dim = e_values[0].len();
    let mut mean = vec![0.0; dim];
    for row in e_values {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut sigma = Matrix::zeros(dim, dim);
    for row in e_values {
        for i in 0..dim {
            for j in 0..dim {
                sigma[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
        }
    }
    for v in sigma.data.iter_mut() {
        *v /= (n - 1) as f64;
    }
    Ok(sigma)
}

/// Estimator covariance `|W|^-2 H^-1 Sigma H^-T` (the CLT normalization
/// `|W| Sigma^-1/2 H (theta_hat - theta) -> N(0, I)` inverted).
pub fn estimator_covariance(
    h: &Matrix,
    sigma: &Matrix,
    window_area: f64,
) -> Result<Matrix, CovarianceError> {
    let hinv = h.inverse()?;
    let cov = hinv.matmul(sigma).matmul(&hinv.transpose());
    let scale = 1.0 / (window_area * window_area);
    let mut out = cov;
    for v in out.data.iter_mut() {
        *v *= scale;
    }
    Ok(out)
}

/// Per-coordinate normal confidence intervals `center +- z * sqrt(diag)`.
pub fn normal_ci(center: &[f64], cov: &Matrix, level: f64) -> Vec<(f64, f64)> {
    let z = normal_quantile(0.5 + level / 2.0);
    center
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let sd = cov[(i, i)].max(0.0).sqrt();
            (c - z * sd, c + z * sd)
        })
        .collect()
}

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 2e-7, plenty for interval and KS work).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Kolmogorov-Smirnov statistic of a sample against the standard normal.
pub fn ks_statistic_normal(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    d
}

/// Asymptotic KS critical value at level 0.01: `1.6276 / sqrt(n)`.
pub fn ks_critical_001(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.15865525).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [0.01, 0.025, 0.2, 0.5, 0.9, 0.975, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-6, "p = {p}");
        }
    }

    #[test]
    fn identity_sanity_coverage() {
        // e-values ~ N(0, I), H = I, |W| = 1: the 95% CI on theta_hat =
        // theta* + e covers theta* for ~95% of replicates by construction
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let n = 4000;
        let es: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                // Box-Muller
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random::<f64>();
                vec![(-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()]
            })
            .collect();
        let sigma = empirical_sigma(&es).unwrap();
        let h = Matrix::identity(1);
        let cov = estimator_covariance(&h, &sigma, 1.0).unwrap();
        let mut covered = 0;
        for e in &es {
            let ci = normal_ci(&[e[0]], &cov, 0.95);
            if ci[0].0 <= 0.0 && 0.0 <= ci[0].1 {
                covered += 1;
            }
        }
        let frac = covered as f64 / n as f64;
        assert!((frac - 0.95).abs() < 0.015, "coverage {frac}");
    }

    #[test]
    fn ks_accepts_normal_rejects_uniform() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let n = 300;
        let normals: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random::<f64>();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        assert!(ks_statistic_normal(&normals) < ks_critical_001(n));
        let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        assert!(ks_statistic_normal(&uniforms) > ks_critical_001(n));
    }

    #[test]
    fn too_few_replicates_rejected() {
        let es = vec![vec![0.0]; 10];
        assert!(matches!(
            empirical_sigma(&es),
            Err(CovarianceError::TooFewReplicates { .. })
        ));
    }
}
