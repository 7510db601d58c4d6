//! Gauss-Legendre quadrature on rectangles and clipped polar rules on discs.

use super::window::{Point, Window};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("quadrature order must be >= 1, got {0}")]
    BadOrder(usize),
    #[error("disc radius must be positive, got {0}")]
    BadRadius(f64),
}

/// Nodes and strictly positive weights; the weights sum to the measure of
/// the integration region.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss-Legendre nodes/weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre_1d(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Tensor-product Gauss-Legendre rule on a window. Exact for bivariate
/// polynomials of coordinate degree <= 2*order - 1 per axis.
pub fn gauss_legendre_2d(window: Window, order: usize) -> Result<QuadratureRule, QuadError> {
    if order < 1 {
        return Err(QuadError::BadOrder(order));
    }
    let (xs, ws) = gauss_legendre_1d(order);
    let (cx, hx) = (0.5 * (window.x0 + window.x1), 0.5 * window.width());
    let (cy, hy) = (0.5 * (window.y0 + window.y1), 0.5 * window.height());
    let mut nodes = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (i, &xi) in xs.iter().enumerate() {
        for (j, &xj) in xs.iter().enumerate() {
            nodes.push([cx + hx * xi, cy + hy * xj]);
            weights.push(ws[i] * ws[j] * hx * hy);
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Polar rule over the disc `{v : |v - center| <= radius}` with nodes
/// falling outside `window` dropped, so the clipped rule integrates
/// `f * 1_W` over the disc. Radial nodes are Gauss-Legendre on [0, radius],
/// angular nodes an offset midpoint grid (no node ever sits exactly on a
/// coordinate axis through the center).
pub fn disc_quadrature(
    center: Point,
    radius: f64,
    window: Window,
    radial_order: usize,
    angular_order: usize,
) -> Result<QuadratureRule, QuadError> {
    if radius <= 0.0 || radius.is_nan() {
        return Err(QuadError::BadRadius(radius));
    }
    if radial_order < 1 || angular_order < 1 {
        return Err(QuadError::BadOrder(radial_order.min(angular_order)));
    }
    let (rs, rw) = gauss_legendre_1d(radial_order);
    let dphi = 2.0 * std::f64::consts::PI / angular_order as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (i, &t) in rs.iter().enumerate() {
        let r = 0.5 * radius * (t + 1.0);
        let wr = 0.5 * radius * rw[i] * r * dphi; // jacobian r folded in
        for j in 0..angular_order {
            let phi = dphi * (j as f64 + 0.5);
            let p = [center[0] + r * phi.cos(), center[1] + r * phi.sin()];
            if window.contains(p) {
                nodes.push(p);
                weights.push(wr);
            }
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_is_midpoint_rule() {
        let rule = gauss_legendre_2d(Window::unit(), 1).unwrap();
        assert_eq!(rule.nodes.len(), 1);
        assert!((rule.nodes[0][0] - 0.5).abs() < 1e-15);
        assert!((rule.nodes[0][1] - 0.5).abs() < 1e-15);
        assert!((rule.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_is_exact_at_any_order() {
        for order in [1, 2, 5, 24, 48] {
            let rule = gauss_legendre_2d(Window::unit(), order).unwrap();
            assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-13, "order {order}");
        }
    }

    #[test]
    fn weights_sum_to_area() {
        let w = Window::new(-2.0, 1.0, 3.0, 4.0).unwrap();
        for order in [1, 3, 24] {
            let rule = gauss_legendre_2d(w, order).unwrap();
            assert!((rule.total_weight() - w.area()).abs() / w.area() < 1e-12);
        }
    }

    #[test]
    fn cubic_times_quadratic_exact_at_order_two() {
        // int_{[0,1]^2} x^3 y^2 = 1/12
        for order in [2, 3, 8] {
            let rule = gauss_legendre_2d(Window::unit(), order).unwrap();
            let got = rule.integrate(|p| p[0].powi(3) * p[1].powi(2));
            assert!((got - 1.0 / 12.0).abs() < 1e-14, "order {order}");
        }
    }

    #[test]
    fn rejects_order_zero() {
        assert_eq!(
            gauss_legendre_2d(Window::unit(), 0).unwrap_err(),
            QuadError::BadOrder(0)
        );
    }

    #[test]
    fn disc_area_inside_window() {
        let rule = disc_quadrature([0.5, 0.5], 0.1, Window::unit(), 8, 32).unwrap();
        let area = rule.integrate(|_| 1.0);
        assert!((area - std::f64::consts::PI * 0.01).abs() < 1e-6);
    }

    #[test]
    fn disc_on_corner_keeps_quarter() {
        // analytically a quarter disc; the offset angular grid makes the
        // clipped rule exact for constants when 4 | angular_order
        let rule = disc_quadrature([0.0, 0.0], 0.2, Window::unit(), 8, 32).unwrap();
        let area = rule.integrate(|_| 1.0);
        assert!((area - std::f64::consts::PI * 0.04 / 4.0).abs() < 1e-4);
    }

    #[test]
    fn radial_moment_closed_form() {
        // int |v - c| dv over a disc of radius r = 2 pi r^3 / 3
        let c = [0.5, 0.5];
        let r = 0.3;
        let rule = disc_quadrature(c, r, Window::unit(), 8, 64).unwrap();
        let got = rule.integrate(|p| super::super::window::dist(p, c));
        let want = 2.0 * std::f64::consts::PI * r.powi(3) / 3.0;
        assert!((got - want).abs() < 1e-6, "got {got} want {want}");
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(disc_quadrature([0.0, 0.0], 0.0, Window::unit(), 4, 8).is_err());
        assert!(disc_quadrature([0.0, 0.0], -1.0, Window::unit(), 4, 8).is_err());
    }
}
