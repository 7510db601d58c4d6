//! Test functions and estimating equations.
//!
//! The second-order equation is `sum_{u != v} f(u,v) - int_{W^2} f rho2`,
//! with `f` a pair weight times the gradient of `log rho2`. Two weights
//! ship: a hard truncation at distance R, and the adaptive weight
//! `w(eps / C(r)^2)` whose support follows the parameter via the practical
//! range. Sums run over ordered pairs, matching the integral side.

use crate::kernels::{CorrelationModel, IntensityModel, KernelModel, PointPattern};
use crate::numerics::grid::close_pairs;
use crate::numerics::quad::{gauss_legendre_1d, gauss_legendre_2d};
use crate::numerics::window::{dist, Point, Window};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EquationError {
    #[error("rho2 is not positive at an included pair (distance {r}); alpha sits on the existence boundary")]
    DegeneratePair { r: f64 },
}

/// Smooth bump `w(r) = exp(1/(r^2 - 1))` on (-1, 1), zero outside.
/// Infinitely differentiable at the support edge.
pub fn weight_w(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 / (r * r - 1.0)).exp()
    }
}

/// Pair weight of the second-order estimating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFunction {
    /// Keep pairs closer than a fixed radius.
    Truncated { r: f64 },
    /// Keep pairs where `|g - 1|` is still a fraction `epsilon` of its
    /// value at zero, smoothed by `weight_w`. For separable kernels the
    /// weight argument reduces to `epsilon / C(r)^2`.
    Adaptive { epsilon: f64 },
}

impl TestFunction {
    /// Distance beyond which this weight vanishes identically.
    pub fn support_radius(&self, corr: &CorrelationModel) -> f64 {
        match self {
            TestFunction::Truncated { r } => *r,
            TestFunction::Adaptive { epsilon } => corr
                .practical_range(*epsilon)
                .expect("practical range exists for epsilon < 1"),
        }
    }

    /// Weight of a pair at distance `r`.
    pub fn weight(&self, corr: &CorrelationModel, r: f64) -> f64 {
        match self {
            TestFunction::Truncated { r: radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Adaptive { epsilon } => {
                let c = corr.correlation(r);
                let c2 = c * c;
                if c2 <= *epsilon {
                    0.0
                } else {
                    weight_w(epsilon / c2)
                }
            }
        }
    }

    /// Sub-intervals of `[0, support_radius]` where the weight is
    /// nonzero: a single interval for the hard truncation, the cached
    /// support lobes of `C(r)^2 > epsilon` for the adaptive weight.
    /// Integrating lobe by lobe keeps Gauss rules effective: the bump
    /// weight has boundary layers at every lobe edge.
    pub fn support_intervals(&self, corr: &CorrelationModel) -> Vec<(f64, f64)> {
        match self {
            TestFunction::Truncated { r } => vec![(0.0, *r)],
            TestFunction::Adaptive { epsilon } => corr
                .weight_support_lobes(*epsilon)
                .expect("lobes exist for epsilon < 1")
                .to_vec(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Truncated { r } => format!("truncated:R={r}"),
            TestFunction::Adaptive { epsilon } => format!("adaptive:eps={epsilon}"),
        }
    }
}

/// Which parameter block the estimating function differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientLayout {
    /// Correlation parameters only (second step of the two-step fit).
    PsiOnly,
    /// Full `(beta, psi)` gradient (simultaneous layout).
    Full,
}

/// Quadrature resolution knobs shared by the integral terms and the
/// sensitivity matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss-Legendre order per axis for window integrals.
    pub outer_order: usize,
    /// Angular nodes of the clipped disc rule.
    pub disc_angular: usize,
    /// Minimum radial nodes (disc rule and 1D distance integrals).
    pub radial_min: usize,
    /// Radial nodes per oscillation wavelength of the correlation.
    pub nodes_per_wavelength: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            outer_order: 24,
            disc_angular: 32,
            radial_min: 16,
            nodes_per_wavelength: 8,
        }
    }
}

impl QuadConfig {
    /// Radial order needed to resolve the correlation's oscillations over
    /// a support of length `radius`.
    pub fn radial_order(&self, corr: &CorrelationModel, radius: f64) -> usize {
        let wavelength = corr.oscillation_wavelength();
        let periods = if wavelength.is_finite() {
            (radius / wavelength).ceil() as usize
        } else {
            0
        };
        (periods * self.nodes_per_wavelength).max(self.radial_min)
    }
}

/// d(log rho2)/d(alpha) at pair distance `r`: `-2 C C_alpha / (1 - C^2)`.
/// Finite as `r -> 0` (the limit is handled by the series branches of the
/// correlation families).
#[inline]
pub fn dlog_rho2_dalpha(corr: &CorrelationModel, r: f64) -> Result<f64, EquationError> {
    let c = corr.correlation(r);
    let g = 1.0 - c * c;
    if g <= 0.0 {
        return Err(EquationError::DegeneratePair { r });
    }
    Ok(-2.0 * c * corr.dcorrelation_dalpha(r) / g)
}

/// d(g)/d(alpha) = -2 C C_alpha.
#[inline]
pub fn dg_dalpha(corr: &CorrelationModel, r: f64) -> f64 {
    -2.0 * corr.correlation(r) * corr.dcorrelation_dalpha(r)
}

/// Evaluate the test-function vector `f(u, v; theta)` itself: the pair
/// weight times the requested block of `grad log rho2`.
pub fn test_function_value(
    model: &KernelModel,
    f: &TestFunction,
    layout: GradientLayout,
    u: Point,
    v: Point,
) -> Result<Vec<f64>, EquationError> {
    let r = dist(u, v);
    let w = f.weight(&model.correlation, r);
    let psi = dlog_rho2_dalpha(&model.correlation, r)?;
    let mut out = Vec::new();
    if layout == GradientLayout::Full {
        let zu = model.intensity.dlog_intensity(u);
        let zv = model.intensity.dlog_intensity(v);
        out.extend(zu.iter().zip(&zv).map(|(a, b)| w * (a + b)));
    }
    out.push(w * psi);
    Ok(out)
}

/// Poisson score `sum_u z(u) - int_W z(u) rho(u; beta) du` for a
/// log-linear intensity (z = grad_beta log rho). For the homogeneous
/// parameterization by `rho` itself the score is `N/rho - |W|`.
pub fn poisson_score(
    pattern: &PointPattern,
    intensity: &IntensityModel,
    quad_order: usize,
) -> Vec<f64> {
    match intensity {
        IntensityModel::Homogeneous { rho } => {
            vec![pattern.len() as f64 / rho - pattern.window.area()]
        }
        IntensityModel::LogLinear { beta } => {
            let p = beta.len();
            let mut score = vec![0.0; p];
            for &u in pattern.points() {
                for (s, z) in score.iter_mut().zip(intensity.covariates(u)) {
                    *s += z;
                }
            }
            let rule = gauss_legendre_2d(pattern.window, quad_order).expect("valid order");
            for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
                let rho = intensity.eval(node);
                for (s, z) in score.iter_mut().zip(intensity.covariates(node)) {
                    *s -= w * z * rho;
                }
            }
            score
        }
    }
}

/// Gauss-Legendre nodes over each support lobe of the weight; weights are
/// plain dr weights (no jacobian).
pub(crate) fn segmented_radial_nodes(
    f: &TestFunction,
    corr: &CorrelationModel,
    config: &QuadConfig,
) -> Vec<(f64, f64)> {
    let wavelength = corr.oscillation_wavelength();
    let mut out = Vec::new();
    for (lo, hi) in f.support_intervals(corr) {
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let periods = if wavelength.is_finite() {
            (len / wavelength).ceil() as usize
        } else {
            0
        };
        let order = (periods * config.nodes_per_wavelength).max(config.radial_min);
        let (xs, ws) = gauss_legendre_1d(order);
        let half = 0.5 * len;
        let mid = 0.5 * (lo + hi);
        for (&x, &w) in xs.iter().zip(&ws) {
            out.push((mid + half * x, half * w));
        }
    }
    out
}

/// Angular intervals of `{phi : u + r e^{i phi} in W}` for a rectangle:
/// the four edge constraints cut the circle into arcs, and each arc is
/// either fully inside or fully outside. Returns up to four `(lo, hi)`
/// intervals within `[0, 2 pi)`.
fn admissible_arcs(window: &Window, u: Point, r: f64, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let tau = 2.0 * std::f64::consts::PI;
    // distance to each edge in units of r
    let cx_hi = (window.x1 - u[0]) / r;
    let cx_lo = (window.x0 - u[0]) / r;
    let cy_hi = (window.y1 - u[1]) / r;
    let cy_lo = (window.y0 - u[1]) / r;
    if cx_hi >= 1.0 && cx_lo <= -1.0 && cy_hi >= 1.0 && cy_lo <= -1.0 {
        out.push((0.0, tau));
        return;
    }
    let mut cuts: Vec<f64> = vec![0.0, tau];
    // cos phi = c cuts at +-acos(c); sin phi = c cuts at asin(c), pi - asin(c)
    for c in [cx_hi, cx_lo] {
        if c.abs() < 1.0 {
            let a = c.acos();
            cuts.push(a);
            cuts.push(tau - a);
        }
    }
    for c in [cy_hi, cy_lo] {
        if c.abs() < 1.0 {
            let a = c.asin();
            cuts.push(a.rem_euclid(tau));
            cuts.push((std::f64::consts::PI - a).rem_euclid(tau));
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo < 1e-14 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (smid, cmid) = mid.sin_cos();
        if cmid <= cx_hi + 1e-12
            && cmid >= cx_lo - 1e-12
            && smid <= cy_hi + 1e-12
            && smid >= cy_lo - 1e-12
        {
            // merge with the previous arc when contiguous
            if let Some(last) = out.last_mut() {
                if (last.1 - lo).abs() < 1e-13 {
                    last.1 = hi;
                    continue;
                }
            }
            out.push((lo, hi));
        }
    }
}

/// Integrate a pair kernel over `{(u, v) : u in W, v in W, |u-v| <=
/// support}`: piecewise Gauss-Legendre in `u` (split where the clipped
/// disc geometry kinks), Gauss-Legendre radial nodes, and exact arc
/// clipping with Gauss-Legendre angular nodes per admissible arc. `body`
/// receives `(u, v, r, du dv weight)`.
pub(crate) fn integrate_close_pairs(
    window: &Window,
    support: f64,
    radial_nodes: &[(f64, f64)],
    angular_order: usize,
    mut body: impl FnMut(Point, Point, f64, f64),
) {
    let ang = angular_order.max(4);
    let (ang_x, ang_w) = gauss_legendre_1d(ang);
    let outer_order = 12;
    let (out_x, out_w) = gauss_legendre_1d(outer_order);
    // outer splits at distance `support` from each edge
    let mut xs = vec![window.x0, window.x1];
    let mut ys = vec![window.y0, window.y1];
    if window.x0 + support < window.x1 - support {
        xs.insert(1, window.x0 + support);
        xs.insert(2, window.x1 - support);
    }
    if window.y0 + support < window.y1 - support {
        ys.insert(1, window.y0 + support);
        ys.insert(2, window.y1 - support);
    }
    let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(4);
    for sx in xs.windows(2) {
        let (hx, mx) = (0.5 * (sx[1] - sx[0]), 0.5 * (sx[1] + sx[0]));
        for sy in ys.windows(2) {
            let (hy, my) = (0.5 * (sy[1] - sy[0]), 0.5 * (sy[1] + sy[0]));
            for (ix, &tx) in out_x.iter().enumerate() {
                for (iy, &ty) in out_x.iter().enumerate() {
                    let u = [mx + hx * tx, my + hy * ty];
                    let wu = out_w[ix] * out_w[iy] * hx * hy;
                    for &(r, wr_plain) in radial_nodes {
                        let wr = wr_plain * r;
                        admissible_arcs(window, u, r, &mut arcs);
                        for &(lo, hi) in &arcs {
                            let half = 0.5 * (hi - lo);
                            let mid = 0.5 * (hi + lo);
                            for (ia, &ta) in ang_x.iter().enumerate() {
                                let phi = mid + half * ta;
                                let (sp, cp) = phi.sin_cos();
                                let v = [u[0] + r * cp, u[1] + r * sp];
                                body(u, v, r, wu * wr * half * ang_w[ia]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Pair-sum and compensator of the second-order estimating function,
/// returned separately so solvers can track the equation's scale.
pub fn second_order_parts(
    pattern: &PointPattern,
    model: &KernelModel,
    f: &TestFunction,
    layout: GradientLayout,
    config: &QuadConfig,
) -> Result<(Vec<f64>, Vec<f64>), EquationError> {
    let support = f.support_radius(&model.correlation);
    let dim = match layout {
        GradientLayout::PsiOnly => 1,
        GradientLayout::Full => model.intensity.dim() + 1,
    };
    let mut sum = vec![0.0; dim];
    // ordered pair sum = 2 x unordered
    for (i, j, _) in close_pairs(pattern.points(), &pattern.window, support) {
        let val = test_function_value(model, f, layout, pattern.points()[i], pattern.points()[j])?;
        for (a, v) in sum.iter_mut().zip(&val) {
            *a += 2.0 * v;
        }
    }
    let integral = second_order_integral(model, f, layout, &pattern.window, config)?;
    Ok((sum, integral))
}

/// The second-order estimating function
/// `e(theta) = sum_{ordered pairs, r <= support} f - int_{W^2} f rho2`.
/// The pair sum uses a cell grid at the support radius; the integral is an
/// outer window rule times an inner clipped disc rule.
pub fn second_order_equation(
    pattern: &PointPattern,
    model: &KernelModel,
    f: &TestFunction,
    layout: GradientLayout,
    config: &QuadConfig,
) -> Result<Vec<f64>, EquationError> {
    let (mut acc, integral) = second_order_parts(pattern, model, f, layout, config)?;
    for (a, i) in acc.iter_mut().zip(&integral) {
        *a -= i;
    }
    Ok(acc)
}

/// `int_{W^2} f(u, v) rho2(u, v) du dv`, the compensator of the pair sum.
pub fn second_order_integral(
    model: &KernelModel,
    f: &TestFunction,
    layout: GradientLayout,
    window: &Window,
    config: &QuadConfig,
) -> Result<Vec<f64>, EquationError> {
    let corr = &model.correlation;
    let support = f.support_radius(corr);
    let radial = segmented_radial_nodes(f, corr, config);
    let dim = match layout {
        GradientLayout::PsiOnly => 1,
        GradientLayout::Full => model.intensity.dim() + 1,
    };
    let mut acc = vec![0.0; dim];
    integrate_close_pairs(window, support, &radial, config.disc_angular / 4, |u, v, r, wt| {
        let weight = f.weight(corr, r);
        if weight == 0.0 {
            return;
        }
        let rho_u = model.intensity.eval(u);
        let rho_v = model.intensity.eval(v);
        let dalpha = dg_dalpha(corr, r);
        let scale = wt * weight;
        match layout {
            GradientLayout::PsiOnly => {
                // f_psi * rho2 = weight * dlog g * rho2 = weight * rho_u rho_v dg
                acc[0] += scale * rho_u * rho_v * dalpha;
            }
            GradientLayout::Full => {
                let c = corr.correlation(r);
                let g = 1.0 - c * c;
                let rho2 = rho_u * rho_v * g;
                let zu = model.intensity.dlog_intensity(u);
                let zv = model.intensity.dlog_intensity(v);
                for (k, (za, zb)) in zu.iter().zip(&zv).enumerate() {
                    acc[k] += scale * (za + zb) * rho2;
                }
                acc[dim - 1] += scale * rho_u * rho_v * dalpha;
            }
        }
    });
    Ok(acc)
}

/// Stationary two-step equation in pairwise-distance form:
/// `e2(alpha) = sum_{ordered pairs} w(r) dlog g - rho_hat^2 |W|^2
/// int w(r) dg dF(r)`. Identical to [`second_order_equation`] with the
/// plug-in `rho_hat = N/|W|` (then `rho_hat^2 |W|^2 = N^2`), up to
/// quadrature (1D distance-CDF weights here instead of the 2D rule).
pub fn stationary_equation_e2(
    pattern: &PointPattern,
    corr: &CorrelationModel,
    rho_hat: f64,
    f: &TestFunction,
    config: &QuadConfig,
) -> Result<f64, EquationError> {
    let (sum, integral) = stationary_e2_parts(pattern, corr, rho_hat, f, config)?;
    Ok(sum - integral)
}

/// Pair-sum and compensator of [`stationary_equation_e2`].
pub fn stationary_e2_parts(
    pattern: &PointPattern,
    corr: &CorrelationModel,
    rho_hat: f64,
    f: &TestFunction,
    config: &QuadConfig,
) -> Result<(f64, f64), EquationError> {
    let support = f.support_radius(corr);
    let mut sum = 0.0;
    for (_, _, r) in close_pairs(pattern.points(), &pattern.window, support) {
        let w = f.weight(corr, r);
        if w != 0.0 {
            sum += 2.0 * w * dlog_rho2_dalpha(corr, r)?;
        }
    }
    let integral = stationary_integral(corr, f, &pattern.window, config, |r| dg_dalpha(corr, r));
    let w_area = pattern.window.area();
    Ok((sum, rho_hat * rho_hat * w_area * w_area * integral))
}

/// `int_0^support weight(r) h(r) dF(r)` against the inter-point distance
/// distribution of the window.
pub fn stationary_integral(
    corr: &CorrelationModel,
    f: &TestFunction,
    window: &Window,
    config: &QuadConfig,
    mut h: impl FnMut(f64) -> f64,
) -> f64 {
    segmented_radial_nodes(f, corr, config)
        .iter()
        .map(|&(r, w)| {
            let wt = f.weight(corr, r);
            if wt == 0.0 {
                0.0
            } else {
                w * crate::numerics::distance::pair_distance_density(window, r) * wt * h(r)
            }
        })
        .sum()
}

/// Outcome of the profiled simultaneous equation at one `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct SimultaneousEval {
    pub value: f64,
    /// Weighted ordered-pair count; zero flags a degenerate evaluation
    /// (no pairs inside the support).
    pub weighted_pairs: f64,
}

/// Simultaneous (profiled) estimating function for stationary models:
/// the intensity is eliminated via its weighted-pair estimate, leaving
/// `e(alpha) = sum w dlog g - [sum w / int w g dF] int w dg dF`.
pub fn simultaneous_equation(
    pattern: &PointPattern,
    corr: &CorrelationModel,
    epsilon: f64,
    config: &QuadConfig,
) -> Result<SimultaneousEval, EquationError> {
    let f = TestFunction::Adaptive { epsilon };
    let support = f.support_radius(corr);
    let mut t1 = 0.0;
    let mut sw = 0.0;
    for (_, _, r) in close_pairs(pattern.points(), &pattern.window, support) {
        let w = f.weight(corr, r);
        if w != 0.0 {
            t1 += 2.0 * w * dlog_rho2_dalpha(corr, r)?;
            sw += 2.0 * w;
        }
    }
    if sw == 0.0 {
        return Ok(SimultaneousEval { value: 0.0, weighted_pairs: 0.0 });
    }
    let ig = stationary_integral(corr, &f, &pattern.window, config, |r| {
        let c = corr.correlation(r);
        1.0 - c * c
    });
    let idg = stationary_integral(corr, &f, &pattern.window, config, |r| dg_dalpha(corr, r));
    Ok(SimultaneousEval {
        value: t1 - sw / ig * idg,
        weighted_pairs: sw,
    })
}

/// Intensity recovered after the simultaneous fit:
/// `rho_hat^2 = |W|^{-2} sum w / int w g dF`.
pub fn simultaneous_rho(
    pattern: &PointPattern,
    corr: &CorrelationModel,
    epsilon: f64,
    config: &QuadConfig,
) -> Result<f64, EquationError> {
    let f = TestFunction::Adaptive { epsilon };
    let support = f.support_radius(corr);
    let mut sw = 0.0;
    for (_, _, r) in close_pairs(pattern.points(), &pattern.window, support) {
        sw += 2.0 * f.weight(corr, r);
    }
    let ig = stationary_integral(corr, &f, &pattern.window, config, |r| {
        let c = corr.correlation(r);
        1.0 - c * c
    });
    let a = pattern.window.area();
    Ok((sw / (a * a * ig)).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{SeedSpec, StreamLabel};
    use rand::Rng;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn weight_w_reference_points() {
        assert!((weight_w(0.0) - 1.0 / E).abs() < 1e-15);
        assert_eq!(weight_w(1.0), 0.0);
        assert_eq!(weight_w(-1.0), 0.0);
        assert_eq!(weight_w(1.5), 0.0);
        assert!((weight_w(0.5) - (-4.0f64 / 3.0).exp()).abs() < 1e-15);
        // smooth at the support edge: values decay to zero
        assert!(weight_w(0.999) < 1e-200);
    }

    #[test]
    fn correlation_gradients_match_finite_differences() {
        let mut rng = SeedSpec::new(42, 0).stream(StreamLabel::Custom(1));
        for _ in 0..200 {
            let alpha = 0.005 + rng.random::<f64>() * 0.08;
            let r = 1e-3 + rng.random::<f64>() * 0.3;
            for corr in [
                CorrelationModel::BesselType { alpha },
                CorrelationModel::Gaussian { alpha },
            ] {
                let h = 1e-6 * alpha;
                let up = corr.with_alpha(alpha + h).correlation(r);
                let dn = corr.with_alpha(alpha - h).correlation(r);
                let fd = (up - dn) / (2.0 * h);
                let an = corr.dcorrelation_dalpha(r);
                // floor the denominator at one thousandth of the natural
                // 1/alpha gradient scale; the gradient has isolated zeros
                let denom = an.abs().max(1e-3 / alpha);
                assert!(
                    ((an - fd) / denom).abs() < 1e-5,
                    "{corr:?} r={r}: analytic {an} fd {fd}"
                );
            }
        }
    }

    #[test]
    fn dlog_rho2_matches_finite_differences() {
        let mut rng = SeedSpec::new(43, 0).stream(StreamLabel::Custom(1));
        for _ in 0..100 {
            let alpha = 0.01 + rng.random::<f64>() * 0.05;
            let r = 5e-3 + rng.random::<f64>() * 0.2;
            let corr = CorrelationModel::BesselType { alpha };
            let h = 1e-6 * alpha;
            let g = |a: f64| {
                let c = corr.with_alpha(a).correlation(r);
                1.0 - c * c
            };
            let fd = (g(alpha + h).ln() - g(alpha - h).ln()) / (2.0 * h);
            let an = dlog_rho2_dalpha(&corr, r).unwrap();
            let denom = an.abs().max(1e-3 / alpha);
            assert!(((an - fd) / denom).abs() < 1e-5, "r={r} alpha={alpha}");
        }
    }

    #[test]
    fn truncated_weight_is_an_indicator() {
        let corr = CorrelationModel::BesselType { alpha: 0.05 };
        let f = TestFunction::Truncated { r: 0.1 };
        assert_eq!(f.weight(&corr, 0.2), 0.0);
        assert_eq!(f.weight(&corr, 0.099), 1.0);
        assert_eq!(f.support_radius(&corr), 0.1);
    }

    #[test]
    fn adaptive_weight_edges() {
        let corr = CorrelationModel::BesselType { alpha: 0.01 };
        let eps = 0.01;
        let f = TestFunction::Adaptive { epsilon: eps };
        // at the practical range C^2 = eps exactly: w(1) = 0
        let range = corr.practical_range(eps).unwrap();
        assert!(f.weight(&corr, range) < 1e-12);
        assert!(f.weight(&corr, range + 1e-4) == 0.0);
        // near r = 0 the argument tends to eps: w(eps) ~ w(0) = 1/e
        let w0 = f.weight(&corr, 1e-9);
        assert!((w0 - weight_w(eps)).abs() < 1e-12);
        assert!((w0 - 1.0 / E).abs() < 2e-4 * (1.0 / E));
        // paper-scale support: ~0.0295 at alpha = 0.01
        assert!(range > 0.023 && range < 0.033, "range {range}");
    }

    #[test]
    fn psi_value_is_intensity_free() {
        // the PsiOnly test-function value must not depend on beta
        let w = crate::numerics::window::Window::unit();
        let f = TestFunction::Adaptive { epsilon: 0.01 };
        let corr = CorrelationModel::BesselType { alpha: 0.03 };
        let m1 = KernelModel::new_unchecked(IntensityModel::Homogeneous { rho: 100.0 }, corr);
        let m2 = KernelModel::new_unchecked(
            IntensityModel::log_linear(vec![2.0, 1.0]).unwrap(),
            corr,
        );
        let u = [0.4, 0.5];
        let v = [0.44, 0.52];
        let a = test_function_value(&m1, &f, GradientLayout::PsiOnly, u, v).unwrap();
        let b = test_function_value(&m2, &f, GradientLayout::PsiOnly, u, v).unwrap();
        assert_eq!(a, b);
        let _ = w;
    }

    #[test]
    fn poisson_score_homogeneous_root() {
        let w = crate::numerics::window::Window::unit();
        let mut rng = SeedSpec::new(44, 0).stream(StreamLabel::Custom(2));
        let pts: Vec<[f64; 2]> = (0..950)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let pattern = PointPattern::new(pts, w).unwrap();
        let at_root = poisson_score(
            &pattern,
            &IntensityModel::Homogeneous { rho: 950.0 },
            16,
        );
        assert!(at_root[0].abs() < 1e-10);
        // root is N / |W|
        let off = poisson_score(&pattern, &IntensityModel::Homogeneous { rho: 900.0 }, 16);
        assert!(off[0] > 0.0);
    }

    #[test]
    fn poisson_score_log_linear_matches_direct_recomputation() {
        let w = crate::numerics::window::Window::unit();
        let mut rng = SeedSpec::new(45, 0).stream(StreamLabel::Custom(3));
        let pts: Vec<[f64; 2]> = (0..300)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let pattern = PointPattern::new(pts.clone(), w).unwrap();
        let beta = [(20.0f64).ln(), 4.0];
        let intensity = IntensityModel::log_linear(beta.to_vec()).unwrap();
        let score = poisson_score(&pattern, &intensity, 24);
        // independent recomputation: plain loops and Simpson's rule for
        // the integral (the y coordinate integrates out)
        let mut want = [0.0f64; 2];
        for p in &pts {
            want[0] += 1.0;
            want[1] += p[0];
        }
        let n_grid = 20_000; // even
        let h = 1.0 / n_grid as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut acc = f(0.0) + f(1.0);
            for i in 1..n_grid {
                let x = i as f64 * h;
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            acc * h / 3.0
        };
        let rho = |x: f64| (beta[0] + beta[1] * x).exp();
        let got0 = want[0] - simpson(&rho);
        let got1 = want[1] - simpson(&|x| x * rho(x));
        assert!((score[0] - got0).abs() < 1e-10, "{} vs {got0}", score[0]);
        assert!((score[1] - got1).abs() < 1e-10, "{} vs {got1}", score[1]);
    }

    #[test]
    fn empty_pattern_equation_is_minus_integral() {
        let w = crate::numerics::window::Window::unit();
        let pattern = PointPattern::new(vec![], w).unwrap();
        let model = KernelModel::new_unchecked(
            IntensityModel::Homogeneous { rho: 100.0 },
            CorrelationModel::BesselType { alpha: 0.03 },
        );
        let f = TestFunction::Adaptive { epsilon: 0.01 };
        let cfg = QuadConfig::default();
        let e = second_order_equation(&pattern, &model, &f, GradientLayout::PsiOnly, &cfg).unwrap();
        let integral =
            second_order_integral(&model, &f, GradientLayout::PsiOnly, &w, &cfg).unwrap();
        assert!((e[0] + integral[0]).abs() < 1e-12 * integral[0].abs().max(1.0));
        assert!(integral[0] != 0.0);
    }

    #[test]
    fn integral_term_against_monte_carlo_oracle() {
        // int_{W^2} f rho2 via 1e7 uniform pair samples
        let w = crate::numerics::window::Window::unit();
        let model = KernelModel::new_unchecked(
            IntensityModel::Homogeneous { rho: 100.0 },
            CorrelationModel::BesselType { alpha: 0.05 },
        );
        let f = TestFunction::Adaptive { epsilon: 0.01 };
        let cfg = QuadConfig::default();
        let integral =
            second_order_integral(&model, &f, GradientLayout::PsiOnly, &w, &cfg).unwrap()[0];
        let mut rng = SeedSpec::new(46, 0).stream(StreamLabel::Custom(4));
        let samples = 10_000_000usize;
        let mut acc = 0.0;
        for _ in 0..samples {
            let u = [rng.random::<f64>(), rng.random::<f64>()];
            let v = [rng.random::<f64>(), rng.random::<f64>()];
            let r = crate::numerics::window::dist(u, v);
            let wt = f.weight(&model.correlation, r);
            if wt == 0.0 {
                continue;
            }
            // f_psi * rho2 = w * dlog * rho2 = w * rho_u rho_v dg
            acc += wt * 100.0 * 100.0 * dg_dalpha(&model.correlation, r);
        }
        let mc = acc / samples as f64; // |W^2| = 1
        let rel = ((integral - mc) / mc.abs()).abs();
        assert!(rel < 1e-2, "quadrature {integral} vs MC {mc} (rel {rel})");
    }

    #[test]
    fn stationary_matches_general_equation() {
        // e2 (distance-CDF form) against the 2D-quadrature form with the
        // same plug-in intensity, on simulated patterns
        let w = crate::numerics::window::Window::unit();
        let truth = KernelModel::new_unchecked(
            IntensityModel::Homogeneous { rho: 100.0 },
            CorrelationModel::BesselType { alpha: 0.05 },
        );
        let cfg = QuadConfig::default();
        for rep in 0..20 {
            let pattern =
                crate::sampler::sample_dpp(&truth, &w, SeedSpec::new(777, rep)).unwrap();
            let rho_hat = pattern.len() as f64 / w.area();
            for alpha in [0.03, 0.05] {
                let corr = CorrelationModel::BesselType { alpha };
                let f = TestFunction::Adaptive { epsilon: 0.01 };
                let e2 = stationary_equation_e2(&pattern, &corr, rho_hat, &f, &cfg).unwrap();
                let model =
                    KernelModel::new_unchecked(IntensityModel::Homogeneous { rho: rho_hat }, corr);
                let general =
                    second_order_equation(&pattern, &model, &f, GradientLayout::PsiOnly, &cfg)
                        .unwrap()[0];
                // both are (sum - integral); agreement is quadrature-level
                let scale = e2.abs().max(general.abs()).max(1e-6);
                assert!(
                    ((e2 - general) / scale).abs() < 1e-3
                        || (e2 - general).abs() < 1e-3 * rho_hat * rho_hat,
                    "rep {rep} alpha {alpha}: e2 {e2} vs general {general}"
                );
            }
        }
    }

    #[test]
    fn far_point_does_not_change_pair_sum() {
        let w = crate::numerics::window::Window::unit();
        let corr = CorrelationModel::BesselType { alpha: 0.03 };
        let f = TestFunction::Adaptive { epsilon: 0.01 };
        let cfg = QuadConfig::default();
        let base = vec![[0.1, 0.1], [0.11, 0.12], [0.13, 0.1]];
        let mut extended = base.clone();
        extended.push([0.9, 0.9]); // far beyond the support radius
        let p1 = PointPattern::new(base, w).unwrap();
        let p2 = PointPattern::new(extended, w).unwrap();
        let (sum1, _) = stationary_e2_parts(&p1, &corr, 1.0, &f, &cfg).unwrap();
        let (sum2, _) = stationary_e2_parts(&p2, &corr, 1.0, &f, &cfg).unwrap();
        assert_eq!(sum1, sum2);
    }

    #[test]
    fn simultaneous_degenerate_flagged() {
        let w = crate::numerics::window::Window::unit();
        // two points too far apart for any adaptive support
        let pattern = PointPattern::new(vec![[0.1, 0.1], [0.9, 0.9]], w).unwrap();
        let corr = CorrelationModel::BesselType { alpha: 0.01 };
        let out = simultaneous_equation(&pattern, &corr, 0.01, &QuadConfig::default()).unwrap();
        assert_eq!(out.weighted_pairs, 0.0);
        assert_eq!(out.value, 0.0);
    }
}
