//! Root solvers: Brent for scalar equations, a box-constrained damped
//! Newton iteration for small vector systems.

use super::linalg::Matrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {flo:.3e}, f(hi) = {fhi:.3e}")]
    NoBracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error("jacobian is numerically singular (condition estimate {0:.3e})")]
    SingularJacobian(f64),
    #[error("starting point must lie strictly inside the box")]
    StartOutsideBox,
}

pub const BRENT_DEFAULT_TOL: f64 = 1e-9;
pub const BRENT_MAX_ITER: usize = 200;
pub const NEWTON_DEFAULT_TOL: f64 = 1e-7;
pub const NEWTON_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 30;
const COND_LIMIT: f64 = 1e12;

/// Brent's method on [lo, hi]. Returns x with `|f(x)| <= tol` or bracket
/// width `<= tol`; never evaluates outside the interval.
pub fn brent_root(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, SolveError> {
    assert!(lo < hi && tol > 0.0);
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(SolveError::NoBracket { lo, hi, flo: fa, fhi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..BRENT_MAX_ITER {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, falling back to secant
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else if xm > 0.0 {
            tol1
        } else {
            -tol1
        };
        fb = f(b);
    }
    Err(SolveError::MaxIterations(BRENT_MAX_ITER))
}

/// Per-coordinate bounds for [`damped_newton`].
#[derive(Debug, Clone)]
pub struct Box2 {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Box2 {
    pub fn unbounded(dim: usize) -> Box2 {
        Box2 {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    fn strictly_inside(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v > lo && v < hi)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Jacobian by central finite differences.
fn fd_jacobian(f: &mut impl FnMut(&[f64]) -> Vec<f64>, x: &[f64], dim: usize) -> Matrix {
    let mut jac = Matrix::zeros(dim, dim);
    let mut xp = x.to_vec();
    for j in 0..dim {
        let h = 1e-6 * x[j].abs().max(1e-4);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Damped Newton for `f(x) = 0` with a finite-difference Jacobian. Steps
/// are halved (up to 30 times) whenever `||f||` fails to decrease or the
/// step would leave the box.
pub fn damped_newton(
    mut f: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    bounds: &Box2,
    tol: f64,
) -> Result<(Vec<f64>, usize), SolveError> {
    if !bounds.strictly_inside(x0) {
        return Err(SolveError::StartOutsideBox);
    }
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut norm = inf_norm(&fx);
    for iter in 0..NEWTON_MAX_ITER {
        if norm <= tol {
            return Ok((x, iter));
        }
        let jac = fd_jacobian(&mut f, &x, dim);
        let (step, cond) = jac
            .solve(&fx)
            .map_err(|_| SolveError::SingularJacobian(f64::INFINITY))?;
        if cond > COND_LIMIT {
            return Err(SolveError::SingularJacobian(cond));
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(&xi, &s)| xi - lambda * s).collect();
            if bounds.strictly_inside(&trial) {
                let ft = f(&trial);
                let nt = inf_norm(&ft);
                if nt < norm || nt <= tol {
                    x = trial;
                    fx = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SolveError::MaxIterations(iter + 1));
        }
    }
    if norm <= tol {
        Ok((x, NEWTON_MAX_ITER))
    } else {
        Err(SolveError::MaxIterations(NEWTON_MAX_ITER))
    }
}
