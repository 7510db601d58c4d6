//! Parametric DPP kernel models.
//!
//! A model is the pair of an intensity `rho(u; beta)` and a translation
//! invariant correlation `C(t; alpha)` with `C(0) = 1`; the kernel is
//! `K(u, v) = sqrt(rho(u) rho(v)) C(u - v)`. Joint intensities of any
//! order are determinants of the kernel matrix, the pair correlation is
//! `g = 1 - C^2`, and a DPP with this kernel exists iff
//! `sup rho * sup spectral density <= 1`.

use crate::numerics::bessel::{bessel_j0, bessel_j1};
use crate::numerics::linalg::Matrix;
use crate::numerics::roots::brent_root;
use crate::numerics::window::{dist, Point, Window};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("existence violated: margin {margin:.6} > 1 (alpha too large for this intensity)")]
    Existence { margin: f64 },
    #[error("log-linear intensity needs 1..=3 coefficients, got {0}")]
    BadCoefficients(usize),
    #[error("joint intensity requires pairwise distinct points")]
    DuplicatePoints,
    #[error("kernel matrix determinant {det:.3e} is negative beyond round-off (scale {scale:.3e})")]
    NegativeDeterminant { det: f64, scale: f64 },
    #[error("no radius solves C(r)^2 = {epsilon}")]
    NoPracticalRange { epsilon: f64 },
    #[error("point ({0}, {1}) lies outside the window")]
    PointOutsideWindow(f64, f64),
}

/// Intensity part of the kernel. `Homogeneous` is the special case of a
/// log-linear model with the constant covariate only, but is kept separate
/// so the closed-form estimator `N/|W|` stays available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IntensityModel {
    Homogeneous { rho: f64 },
    /// `rho(u) = exp(beta . z(u))` with covariates `z(u) = (1, x, y)`
    /// truncated to the length of `beta` (1 to 3 coefficients).
    LogLinear { beta: Vec<f64> },
}

impl IntensityModel {
    pub fn log_linear(beta: Vec<f64>) -> Result<IntensityModel, ModelError> {
        if beta.is_empty() || beta.len() > 3 {
            return Err(ModelError::BadCoefficients(beta.len()));
        }
        Ok(IntensityModel::LogLinear { beta })
    }

    /// Covariate vector z(u) of the log-linear form.
    pub fn covariates(&self, u: Point) -> Vec<f64> {
        match self {
            IntensityModel::Homogeneous { .. } => vec![1.0],
            IntensityModel::LogLinear { beta } => {
                let full = [1.0, u[0], u[1]];
                full[..beta.len()].to_vec()
            }
        }
    }

    /// Gradient of `log rho(u)` in this variant's own parameters:
    /// `1/rho` for the plain-intensity parameterization, the covariates
    /// for log-linear coefficients.
    pub fn dlog_intensity(&self, u: Point) -> Vec<f64> {
        match self {
            IntensityModel::Homogeneous { rho } => vec![1.0 / rho],
            IntensityModel::LogLinear { .. } => self.covariates(u),
        }
    }

    #[inline]
    pub fn eval(&self, u: Point) -> f64 {
        match self {
            IntensityModel::Homogeneous { rho } => *rho,
            IntensityModel::LogLinear { beta } => {
                let mut s = beta[0];
                if beta.len() > 1 {
                    s += beta[1] * u[0];
                }
                if beta.len() > 2 {
                    s += beta[2] * u[1];
                }
                s.exp()
            }
        }
    }

    /// Exact supremum of the intensity over a rectangle. Log-linear
    /// intensities are monotone in each coordinate, so the sup sits at a
    /// corner.
    pub fn sup_on(&self, window: &Window) -> f64 {
        match self {
            IntensityModel::Homogeneous { rho } => *rho,
            IntensityModel::LogLinear { .. } => window
                .corners()
                .iter()
                .map(|&c| self.eval(c))
                .fold(0.0, f64::max),
        }
    }

    /// Number of intensity parameters.
    pub fn dim(&self) -> usize {
        match self {
            IntensityModel::Homogeneous { .. } => 1,
            IntensityModel::LogLinear { beta } => beta.len(),
        }
    }

    /// Replace the parameters, keeping the variant.
    pub fn with_params(&self, params: &[f64]) -> IntensityModel {
        match self {
            IntensityModel::Homogeneous { .. } => IntensityModel::Homogeneous { rho: params[0] },
            IntensityModel::LogLinear { .. } => IntensityModel::LogLinear {
                beta: params.to_vec(),
            },
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            IntensityModel::Homogeneous { rho } => vec![*rho],
            IntensityModel::LogLinear { beta } => beta.clone(),
        }
    }
}

/// Correlation families. Both are isotropic with a single range
/// parameter `alpha` and unit-mass spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CorrelationModel {
    /// `C(r) = J1(2 r / alpha) / (r / alpha)`; spectral density is the
    /// indicator of the disc of radius `1/(pi alpha)` times `pi alpha^2`.
    BesselType { alpha: f64 },
    /// `C(r) = exp(-r^2 / alpha^2)`; spectral density
    /// `pi alpha^2 exp(-pi^2 alpha^2 |xi|^2)`.
    Gaussian { alpha: f64 },
}

impl CorrelationModel {
    pub fn alpha(&self) -> f64 {
        match self {
            CorrelationModel::BesselType { alpha } | CorrelationModel::Gaussian { alpha } => *alpha,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> CorrelationModel {
        match self {
            CorrelationModel::BesselType { .. } => CorrelationModel::BesselType { alpha },
            CorrelationModel::Gaussian { .. } => CorrelationModel::Gaussian { alpha },
        }
    }

    /// C(r) at lag distance `r >= 0`. `C(0) = 1` for every family.
    pub fn correlation(&self, r: f64) -> f64 {
        match self {
            CorrelationModel::BesselType { alpha } => {
                let z = 2.0 * r / alpha;
                if z < 1e-4 {
                    // 2 J1(z)/z expanded; the z^6 term is below 1e-26 here
                    1.0 - z * z / 8.0 + z.powi(4) / 192.0
                } else {
                    2.0 * bessel_j1(z) / z
                }
            }
            CorrelationModel::Gaussian { alpha } => (-(r * r) / (alpha * alpha)).exp(),
        }
    }

    /// dC/dalpha at lag `r`, analytic per family. For the Bessel-type
    /// kernel `dC/dalpha = (2/alpha) (C(z) - J0(z))` with `z = 2r/alpha`.
    pub fn dcorrelation_dalpha(&self, r: f64) -> f64 {
        match self {
            CorrelationModel::BesselType { alpha } => {
                let z = 2.0 * r / alpha;
                if z < 1e-4 {
                    // (2/alpha) (C - J0) = (2/alpha)(z^2/8 - z^4/96 + ...)
                    (2.0 / alpha) * (z * z / 8.0 - z.powi(4) / 96.0)
                } else {
                    (2.0 / alpha) * (self.correlation(r) - bessel_j0(z))
                }
            }
            CorrelationModel::Gaussian { alpha } => {
                let c = self.correlation(r);
                c * 2.0 * r * r / alpha.powi(3)
            }
        }
    }

    /// Spectral density at frequency `xi` (unit total mass).
    pub fn spectral_density(&self, xi: [f64; 2]) -> f64 {
        let n2 = xi[0] * xi[0] + xi[1] * xi[1];
        match self {
            CorrelationModel::BesselType { alpha } => {
                let cutoff = 1.0 / (std::f64::consts::PI * alpha);
                if n2.sqrt() <= cutoff {
                    std::f64::consts::PI * alpha * alpha
                } else {
                    0.0
                }
            }
            CorrelationModel::Gaussian { alpha } => {
                let a2 = alpha * alpha;
                std::f64::consts::PI * a2 * (-std::f64::consts::PI.powi(2) * a2 * n2).exp()
            }
        }
    }

    /// `sup_xi` of the spectral density: `pi alpha^2` for both families.
    pub fn spectral_sup(&self) -> f64 {
        std::f64::consts::PI * self.alpha() * self.alpha()
    }

    /// Radial wavelength of the correlation's oscillation, used to scale
    /// quadrature orders. Infinite for monotone families.
    pub fn oscillation_wavelength(&self) -> f64 {
        match self {
            // J1(2r/alpha) has period pi alpha in r
            CorrelationModel::BesselType { alpha } => std::f64::consts::PI * alpha,
            CorrelationModel::Gaussian { .. } => f64::INFINITY,
        }
    }

    /// Largest `r` with `C(r)^2 = epsilon`: the practical range of the
    /// pair correlation `g = 1 - C^2`, since `|g(r) - 1| = C(r)^2`.
    pub fn practical_range(&self, epsilon: f64) -> Result<f64, ModelError> {
        let lobes = self.weight_support_lobes(epsilon)?;
        Ok(lobes.last().expect("at least one lobe").1)
    }

    /// Sub-intervals of `{r : C(r)^2 > epsilon}` — the support lobes of
    /// the adaptive weight, as `(lo, hi)` pairs ending at the practical
    /// range.
    ///
    /// Both families scale exactly linearly in `alpha`, so the lobes are
    /// located once per (family, epsilon) at unit scale — by a dense grid
    /// scan from a conservative decay-envelope bound downward, each
    /// crossing polished with Brent — and cached.
    pub fn weight_support_lobes(&self, epsilon: f64) -> Result<Arc<Vec<(f64, f64)>>, ModelError> {
        assert!(epsilon > 0.0 && epsilon < 1.0);
        type LobeCache = Mutex<HashMap<(u8, u64), Arc<Vec<(f64, f64)>>>>;
        static CACHE: OnceLock<LobeCache> = OnceLock::new();
        let key = (
            match self {
                CorrelationModel::BesselType { .. } => 0u8,
                CorrelationModel::Gaussian { .. } => 1u8,
            },
            epsilon.to_bits(),
        );
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let unit = {
            let guard = cache.lock().expect("lobe cache");
            guard.get(&key).cloned()
        };
        let unit = match unit {
            Some(u) => u,
            None => {
                let computed = Arc::new(self.with_alpha(1.0).scan_unit_lobes(epsilon)?);
                cache
                    .lock()
                    .expect("lobe cache")
                    .insert(key, computed.clone());
                computed
            }
        };
        let alpha = self.alpha();
        Ok(Arc::new(
            unit.iter().map(|&(lo, hi)| (lo * alpha, hi * alpha)).collect(),
        ))
    }

    /// Locate the support lobes at `alpha = 1` by a downward scan.
    fn scan_unit_lobes(&self, epsilon: f64) -> Result<Vec<(f64, f64)>, ModelError> {
        debug_assert_eq!(self.alpha(), 1.0);
        let h = |r: f64| self.correlation(r).powi(2) - epsilon;
        let mut upper = match self {
            CorrelationModel::BesselType { .. } => {
                // decay envelope: C(z)^2 <= (8/pi)(1 + 1/z)^2 / z^3
                1.2 * (9.0 / (std::f64::consts::PI * epsilon)).cbrt().max(2.0) / 2.0
            }
            CorrelationModel::Gaussian { .. } => 1.2 * (-epsilon.ln() / 2.0).sqrt(),
        };
        while h(upper) >= 0.0 {
            upper *= 1.5;
        }
        let steps = 8192;
        let dr = upper / steps as f64;
        // C(0)^2 = 1 > epsilon: the first lobe always starts at zero
        let mut lobes: Vec<(f64, f64)> = Vec::new();
        let mut start: Option<f64> = Some(0.0);
        let mut prev = 0.0f64;
        for i in 1..=steps {
            let r = i as f64 * dr;
            let inside = h(r) > 0.0;
            match (start, inside) {
                (Some(s0), false) => {
                    let cross = brent_root(h, prev, r, 1e-14).unwrap_or(prev);
                    lobes.push((s0, cross));
                    start = None;
                }
                (None, true) => {
                    let cross = brent_root(h, prev, r, 1e-14).unwrap_or(r);
                    start = Some(cross);
                }
                _ => {}
            }
            prev = r;
        }
        if let Some(s0) = start {
            lobes.push((s0, upper));
        }
        if lobes.is_empty() {
            return Err(ModelError::NoPracticalRange { epsilon });
        }
        Ok(lobes)
    }
}

/// Extension point for kernels beyond the separable family shipped here.
pub trait Kernel {
    fn eval(&self, u: Point, v: Point) -> f64;
    fn intensity(&self, u: Point) -> f64 {
        self.eval(u, u)
    }
}

/// Separable DPP kernel `K(u,v) = sqrt(rho(u) rho(v)) C(u - v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub intensity: IntensityModel,
    pub correlation: CorrelationModel,
}

impl Kernel for KernelModel {
    #[inline]
    fn eval(&self, u: Point, v: Point) -> f64 {
        self.kernel_eval(u, v)
    }
}

impl KernelModel {
    /// Build a model, rejecting parameter combinations for which no DPP
    /// exists on the window.
    pub fn new(
        intensity: IntensityModel,
        correlation: CorrelationModel,
        window: &Window,
    ) -> Result<KernelModel, ModelError> {
        let model = KernelModel { intensity, correlation };
        let margin = model.existence_margin(window);
        if margin > 1.0 {
            return Err(ModelError::Existence { margin });
        }
        Ok(model)
    }

    /// Like [`KernelModel::new`] but without the existence gate; used by
    /// solvers that walk the admissible boundary.
    pub fn new_unchecked(intensity: IntensityModel, correlation: CorrelationModel) -> KernelModel {
        KernelModel { intensity, correlation }
    }

    /// `sup rho * sup spectral density`; the model is a valid DPP iff this
    /// is at most 1. Equals `pi alpha^2 sup rho` for both families.
    pub fn existence_margin(&self, window: &Window) -> f64 {
        self.intensity.sup_on(window) * self.correlation.spectral_sup()
    }

    #[inline]
    pub fn kernel_eval(&self, u: Point, v: Point) -> f64 {
        let ru = self.intensity.eval(u);
        if u == v {
            return ru;
        }
        let rv = self.intensity.eval(v);
        (ru * rv).sqrt() * self.correlation.correlation(dist(u, v))
    }

    /// n-th joint intensity: determinant of the kernel matrix, with tiny
    /// negative round-off (relative to the product of intensities) clamped
    /// to zero.
    pub fn joint_intensity(&self, points: &[Point]) -> Result<f64, ModelError> {
        assert!(!points.is_empty());
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(ModelError::DuplicatePoints);
                }
            }
        }
        let n = points.len();
        let mut m = Matrix::zeros(n, n);
        let mut scale = 1.0;
        for i in 0..n {
            for j in i..n {
                let k = self.kernel_eval(points[i], points[j]);
                m[(i, j)] = k;
                m[(j, i)] = k;
            }
            scale *= m[(i, i)];
        }
        let det = m.determinant();
        if det < 0.0 {
            if det >= -1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Ok(0.0);
            }
            return Err(ModelError::NegativeDeterminant { det, scale });
        }
        Ok(det)
    }

    /// Pair correlation `g(u, v) = 1 - C(u - v)^2`, independent of the
    /// intensity parameters.
    pub fn pair_correlation(&self, u: Point, v: Point) -> f64 {
        let c = self.correlation.correlation(dist(u, v));
        1.0 - c * c
    }

    /// Largest `r` with `|g(r) - 1| = epsilon`; see
    /// [`CorrelationModel::practical_range`].
    pub fn adaptive_range(&self, epsilon: f64) -> Result<f64, ModelError> {
        self.correlation.practical_range(epsilon)
    }
}

/// A finite point configuration observed on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<Point>,
    pub window: Window,
}

impl PointPattern {
    /// Validates that all points lie in the window and that no coordinate
    /// pair repeats (joint intensities are undefined on ties).
    pub fn new(points: Vec<Point>, window: Window) -> Result<PointPattern, ModelError> {
        for p in &points {
            if !window.contains(*p) {
                return Err(ModelError::PointOutsideWindow(p[0], p[1]));
            }
        }
        let mut sorted: Vec<Point> = points.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::DuplicatePoints);
        }
        Ok(PointPattern { points, window })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_correlation() -> impl Strategy<Value = CorrelationModel> {
        (0.005f64..0.08, prop::bool::ANY).prop_map(|(alpha, bessel)| {
            if bessel {
                CorrelationModel::BesselType { alpha }
            } else {
                CorrelationModel::Gaussian { alpha }
            }
        })
    }

    proptest! {
        // determinant repulsion: 0 <= rho^(n) <= prod rho(u_i) for any
        // distinct tuple of up to 5 points
        #[test]
        fn joint_intensity_bounded_by_intensity_product(
            corr in arb_correlation(),
            rho in 10.0f64..120.0,
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..=5),
        ) {
            let model = KernelModel::new_unchecked(IntensityModel::Homogeneous { rho }, corr);
            let points: Vec<Point> = pts.iter().map(|&(x, y)| [x, y]).collect();
            // skip accidental duplicates (probability zero, but cheap to guard)
            let mut sorted = points.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let value = model.joint_intensity(&points).unwrap();
            let product = rho.powi(points.len() as i32);
            prop_assert!(value >= 0.0);
            prop_assert!(value <= product * (1.0 + 1e-9));
        }

        #[test]
        fn pair_correlation_symmetric_unit_interval(
            corr in arb_correlation(),
            rho in 10.0f64..120.0,
            u in (0.0f64..1.0, 0.0f64..1.0),
            v in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let model = KernelModel::new_unchecked(IntensityModel::Homogeneous { rho }, corr);
            let g1 = model.pair_correlation([u.0, u.1], [v.0, v.1]);
            let g2 = model.pair_correlation([v.0, v.1], [u.0, u.1]);
            prop_assert_eq!(g1, g2);
            prop_assert!((0.0..=1.0).contains(&g1));
        }
    }
}
