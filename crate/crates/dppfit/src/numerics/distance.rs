//! Distribution of the distance between two uniform points of a rectangle,
//! via the set-covariance integral.
//!
//! For a rectangle W with side lengths L1, L2 the set covariance is
//! `gamma_W(t) = (L1 - |t1|)_+ (L2 - |t2|)_+`, and the distance CDF is
//! `F(r) = |W|^{-2} int_{|t| <= r} gamma_W(t) dt`. One polar code path
//! covers every rectangle; tests pin it against a Monte Carlo oracle.
//! The integrand is piecewise smooth with breakpoints at s = L1, L2, so
//! radial integration is split there.

use super::quad::gauss_legendre_1d;
use super::window::Window;
use std::f64::consts::FRAC_PI_2;

const ANGULAR_ORDER: usize = 32;
const RADIAL_ORDER: usize = 48;

/// `4 int_0^{pi/2} gamma_W(s cos, s sin) dphi` (quadrant symmetry).
/// Closed form while the circle of radius `s` stays inside the rectangle;
/// beyond that the angular support shrinks to `(phi_lo, phi_hi)` and the
/// smooth restriction is integrated by Gauss-Legendre.
fn ring_mass(window: &Window, s: f64) -> f64 {
    let l1 = window.width();
    let l2 = window.height();
    if s <= 0.0 {
        return 2.0 * std::f64::consts::PI * l1 * l2;
    }
    if s <= l1.min(l2) {
        // int (L1 - s cos)(L2 - s sin) dphi over [0, pi/2]
        return 4.0 * (FRAC_PI_2 * l1 * l2 - (l1 + l2) * s + 0.5 * s * s);
    }
    let phi_lo = if s > l1 { (l1 / s).acos() } else { 0.0 };
    let phi_hi = if s > l2 { (l2 / s).asin() } else { FRAC_PI_2 };
    if phi_lo >= phi_hi {
        return 0.0;
    }
    let (xs, ws) = gauss_legendre_1d(ANGULAR_ORDER);
    let half = 0.5 * (phi_hi - phi_lo);
    let mid = 0.5 * (phi_hi + phi_lo);
    let mut acc = 0.0;
    for (&x, &w) in xs.iter().zip(&ws) {
        let phi = mid + half * x;
        acc += w * (l1 - s * phi.cos()) * (l2 - s * phi.sin());
    }
    4.0 * acc * half
}

/// Radial breakpoints of `s -> ring_mass(s)` inside `(0, upper)`.
fn breakpoints(window: &Window, upper: f64) -> Vec<f64> {
    let mut cuts = vec![0.0];
    for b in [
        window.width().min(window.height()),
        window.width().max(window.height()),
    ] {
        if b > 0.0 && b < upper {
            cuts.push(b);
        }
    }
    cuts.push(upper);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts
}

fn radial_integral(window: &Window, upper: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (xs, ws) = gauss_legendre_1d(RADIAL_ORDER);
    let cuts = breakpoints(window, upper);
    let mut acc = 0.0;
    for seg in cuts.windows(2) {
        let half = 0.5 * (seg[1] - seg[0]);
        let mid = 0.5 * (seg[1] + seg[0]);
        for (&x, &w) in xs.iter().zip(&ws) {
            let s = mid + half * x;
            acc += w * half * s * ring_mass(window, s) * f(s);
        }
    }
    acc
}

/// CDF of `R = |U - V|` for independent uniform U, V on the window.
/// Nondecreasing in `r`; equals 1 at the window diameter.
pub fn distance_cdf(window: &Window, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let diam = window.diameter();
    if r >= diam {
        return 1.0;
    }
    let a = window.area();
    (radial_integral(window, r, |_| 1.0) / (a * a)).min(1.0)
}

/// Density of the inter-point distance measure at radius `r`:
/// `dF(r)/dr = r * ring_mass(r) / |W|^2`.
pub(crate) fn pair_distance_density(window: &Window, r: f64) -> f64 {
    let a = window.area();
    r * ring_mass(window, r) / (a * a)
}

/// Quadrature rule for integrals `int_0^upper h(r) dF(r)`: 1D radial nodes
/// with the set-covariance density folded into the weights. `order` is the
/// Gauss-Legendre order per smooth segment; it should grow with the number
/// of oscillations of `h` over the range.
pub fn distance_measure_rule(window: &Window, upper: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let upper = upper.min(window.diameter());
    let (xs, ws) = gauss_legendre_1d(order.max(8));
    let a = window.area();
    let cuts = breakpoints(window, upper);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in cuts.windows(2) {
        let half = 0.5 * (seg[1] - seg[0]);
        let mid = 0.5 * (seg[1] + seg[0]);
        for (&x, &w) in xs.iter().zip(&ws) {
            let s = mid + half * x;
            nodes.push(s);
            weights.push(w * half * s * ring_mass(window, s) / (a * a));
        }
    }
    (nodes, weights)
}
