//! Bessel functions J0 and J1, accurate to better than 1e-12 absolute on
//! [-50, 50].
//!
//! Three regimes per function:
//!   * |x| <= 7: plain f64 power series (round-off stays below ~2e-13),
//!   * 7 < |x| <= 16: the same series summed in double-double arithmetic,
//!     because cancellation in f64 grows past the error budget there,
//!   * |x| > 16: Hankel asymptotic expansion, truncated at the smallest
//!     term (the optimal-truncation remainder is ~e^{-2x}, well below
//!     1e-13 beyond the crossover).
//!
//! No external special-function crate; everything below is self-contained.

use super::dd::Dd;
use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_F64_CUTOFF: f64 = 7.0;
const ASYMPTOTIC_CUTOFF: f64 = 16.0;

/// J1(x) to absolute accuracy <= 1e-12 for |x| <= 50. Odd by construction.
pub fn bessel_j1(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let val = if ax <= SERIES_F64_CUTOFF {
        j1_series_f64(ax)
    } else if ax <= ASYMPTOTIC_CUTOFF {
        j1_series_dd(ax)
    } else {
        hankel(1, ax)
    };
    if x < 0.0 {
        -val
    } else {
        val
    }
}

/// J0(x), same accuracy contract as [`bessel_j1`]. Even by construction.
pub fn bessel_j0(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= SERIES_F64_CUTOFF {
        j0_series_f64(ax)
    } else if ax <= ASYMPTOTIC_CUTOFF {
        j0_series_dd(ax)
    } else {
        hankel(0, ax)
    }
}

// J1(x) = (x/2) sum_k (-1)^k (x^2/4)^k / (k! (k+1)!)
fn j1_series_f64(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut acc = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + 1.0));
        let signed = if (k as u64) % 2 == 1 { -term } else { term };
        acc += signed;
        if term < 1e-18 * acc.abs().max(1e-3) {
            break;
        }
        k += 1.0;
        if k > 60.0 {
            break;
        }
    }
    0.5 * x * acc
}

fn j0_series_f64(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut acc = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        let signed = if (k as u64) % 2 == 1 { -term } else { term };
        acc += signed;
        if term < 1e-18 * acc.abs().max(1e-3) {
            break;
        }
        k += 1.0;
        if k > 60.0 {
            break;
        }
    }
    acc
}

fn j1_series_dd(x: f64) -> f64 {
    let q = Dd::from_f64(x).mul(Dd::from_f64(x)).mul_f64(0.25);
    let mut term = Dd::from_f64(1.0);
    let mut acc = Dd::from_f64(1.0);
    let mut k = 1.0f64;
    while k <= 90.0 {
        term = term.mul(q).div_f64(k * (k + 1.0));
        acc = if (k as u64) % 2 == 1 {
            acc.add(term.neg())
        } else {
            acc.add(term)
        };
        if term.abs_hi() < 1e-35 {
            break;
        }
        k += 1.0;
    }
    acc.mul_f64(0.5 * x).to_f64()
}

fn j0_series_dd(x: f64) -> f64 {
    let q = Dd::from_f64(x).mul(Dd::from_f64(x)).mul_f64(0.25);
    let mut term = Dd::from_f64(1.0);
    let mut acc = Dd::from_f64(1.0);
    let mut k = 1.0f64;
    while k <= 90.0 {
        term = term.mul(q).div_f64(k * k);
        acc = if (k as u64) % 2 == 1 {
            acc.add(term.neg())
        } else {
            acc.add(term)
        };
        if term.abs_hi() < 1e-35 {
            break;
        }
        k += 1.0;
    }
    acc.to_f64()
}

// Hankel expansion: J_nu(x) ~ sqrt(2/(pi x)) (P cos w - Q sin w),
// w = x - (2 nu + 1) pi/4, with
//   a_0 = 1,  a_m = a_{m-1} (4 nu^2 - (2m-1)^2) / (8 m),
//   P = sum (-1)^k a_{2k} / x^{2k},  Q = sum (-1)^k a_{2k+1} / x^{2k+1}.
// Terms are added while they shrink; the remainder is below the first
// omitted term.
fn hankel(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0; // a_m / x^m, running
    let mut prev = f64::INFINITY;
    for m in 0u32..40 {
        if m > 0 {
            let tm = 2.0 * m as f64 - 1.0;
            a *= (mu - tm * tm) / (8.0 * m as f64 * x);
        }
        let mag = a.abs();
        if mag >= prev || mag < 1e-19 {
            break;
        }
        prev = mag;
        // (-1)^k with m = 2k or m = 2k+1
        let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if m % 2 == 0 {
            p += sign * a;
        } else {
            q += sign * a;
        }
    }
    let w = x - (2.0 * nu as f64 + 1.0) * FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn j1_odd_everywhere(x in -50.0f64..50.0) {
            prop_assert!((bessel_j1(x) + bessel_j1(-x)).abs() <= 1e-14);
        }

        #[test]
        fn j0_j1_bounded_by_one(x in -50.0f64..50.0) {
            prop_assert!(bessel_j0(x).abs() <= 1.0 + 1e-12);
            prop_assert!(bessel_j1(x).abs() <= 1.0 + 1e-12);
        }
    }
}
