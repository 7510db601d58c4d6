//! Browser bindings for the DPP toolkit: sample a pattern on the unit
//! square, trace the pair-correlation curve with its adaptive practical
//! range, and fit the range parameter back from the displayed points.
//!
//! The exported functions wrap plain Rust implementations
//! (`*_impl`), which also compile and test natively.

use dppfit::inference::{
    fit_two_step, CorrelationFamily, FitConfig, IntensityForm, ModelFamily, TestFunction,
};
use dppfit::kernels::{CorrelationModel, IntensityModel, KernelModel, PointPattern};
use dppfit::numerics::rng::SeedSpec;
use dppfit::numerics::window::Window;
use wasm_bindgen::prelude::*;

fn correlation(family: &str, alpha: f64) -> Result<CorrelationModel, String> {
    match family {
        "bessel" => Ok(CorrelationModel::BesselType { alpha }),
        "gaussian" => Ok(CorrelationModel::Gaussian { alpha }),
        other => Err(format!("unknown family '{other}' (bessel | gaussian)")),
    }
}

fn sample_impl(family: &str, rho: f64, alpha: f64, seed: u64) -> Result<Vec<f64>, String> {
    let corr = correlation(family, alpha)?;
    let window = Window::unit();
    let model = KernelModel::new(IntensityModel::Homogeneous { rho }, corr, &window)
        .map_err(|e| e.to_string())?;
    let pattern = dppfit::sampler::sample_dpp(&model, &window, SeedSpec::new(seed, 0))
        .map_err(|e| e.to_string())?;
    let mut flat = Vec::with_capacity(2 * pattern.len());
    for p in pattern.points() {
        flat.push(p[0]);
        flat.push(p[1]);
    }
    Ok(flat)
}

fn curve_impl(
    family: &str,
    alpha: f64,
    epsilon: f64,
    r_max: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let corr = correlation(family, alpha)?;
    let f = TestFunction::Adaptive { epsilon };
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let r = r_max * i as f64 / (n - 1).max(1) as f64;
        let c = corr.correlation(r);
        out.push(r);
        out.push(1.0 - c * c); // pair correlation g(r)
        out.push(f.weight(&corr, r)); // adaptive weight at this lag
    }
    Ok(out)
}

fn fit_impl(coords: &[f64], family: &str, method: &str) -> Result<String, String> {
    if !coords.len().is_multiple_of(2) {
        return Err("coordinate array must have even length".into());
    }
    let points: Vec<[f64; 2]> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let pattern = PointPattern::new(points, Window::unit()).map_err(|e| e.to_string())?;
    let correlation = match family {
        "bessel" => CorrelationFamily::BesselType,
        "gaussian" => CorrelationFamily::Gaussian,
        other => return Err(format!("unknown family '{other}'")),
    };
    let test_function = match method.split_once(':') {
        Some(("truncated", rest)) => TestFunction::Truncated {
            r: rest
                .strip_prefix("R=")
                .and_then(|v| v.parse().ok())
                .ok_or("method: truncated:R=<r>")?,
        },
        Some(("adaptive", rest)) => TestFunction::Adaptive {
            epsilon: rest
                .strip_prefix("eps=")
                .and_then(|v| v.parse().ok())
                .ok_or("method: adaptive:eps=<e>")?,
        },
        _ => return Err("method: truncated:R=<r> | adaptive:eps=<e>".into()),
    };
    let fam = ModelFamily {
        intensity: IntensityForm::Homogeneous,
        correlation,
    };
    let fit = fit_two_step(&pattern, &fam, &test_function, &FitConfig::default())
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&fit).map_err(|e| e.to_string())
}

/// Sample a homogeneous DPP on the unit square; returns interleaved
/// x0,y0,x1,y1,... coordinates.
#[wasm_bindgen]
pub fn sample_pattern(family: &str, rho: f64, alpha: f64, seed: u32) -> Result<Vec<f64>, JsValue> {
    sample_impl(family, rho, alpha, seed as u64).map_err(|e| JsValue::from_str(&e))
}

/// Pair-correlation curve: interleaved (r, g(r), adaptive weight) triples.
#[wasm_bindgen]
pub fn pair_correlation_curve(
    family: &str,
    alpha: f64,
    epsilon: f64,
    r_max: f64,
    n: usize,
) -> Result<Vec<f64>, JsValue> {
    curve_impl(family, alpha, epsilon, r_max, n).map_err(|e| JsValue::from_str(&e))
}

/// Largest r with |g(r) - 1| = epsilon.
#[wasm_bindgen]
pub fn practical_range(family: &str, alpha: f64, epsilon: f64) -> Result<f64, JsValue> {
    correlation(family, alpha)
        .and_then(|c| c.practical_range(epsilon).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Existence margin `pi alpha^2 rho`; a DPP exists iff this is <= 1.
#[wasm_bindgen]
pub fn existence_margin(family: &str, rho: f64, alpha: f64) -> Result<f64, JsValue> {
    let corr = correlation(family, alpha).map_err(|e| JsValue::from_str(&e))?;
    let model = KernelModel::new_unchecked(IntensityModel::Homogeneous { rho }, corr);
    Ok(model.existence_margin(&Window::unit()))
}

/// Two-step fit of the range parameter on interleaved unit-square
/// coordinates; returns the fit result as JSON.
#[wasm_bindgen]
pub fn fit_alpha(coords: &[f64], family: &str, method: &str) -> Result<String, JsValue> {
    fit_impl(coords, family, method).map_err(|e| JsValue::from_str(&e))
}
