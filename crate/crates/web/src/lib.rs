//! WebAssembly bindings for the browser demo in `www/`.

use betarc::dynamics::{Histogram, MapFamily, MapSpec};
use betarc::model::{simulate, unconditional_density_curve, DensityMethod, ModelSpec, ParamVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn pure(map: &str, theta: f64, nu: f64, u0: f64) -> Result<(ModelSpec, ParamVector), betarc::error::Error> {
    let family: MapFamily = map.parse()?;
    let spec = ModelSpec::pure_chaotic(family);
    let gamma = ParamVector::pure(nu, theta, u0);
    gamma.validate(&spec)?;
    Ok((spec, gamma))
}

/// The first `n` orbit values followed by `bins` histogram heights.
pub fn orbit_and_histogram_native(
    map: &str,
    theta: f64,
    u0: f64,
    n: usize,
    bins: usize,
) -> Result<Vec<f64>, betarc::error::Error> {
    let family: MapFamily = map.parse()?;
    let spec = MapSpec::new(family, theta)?;
    if bins == 0 {
        return Err(betarc::error::Error::InvalidParameter("bins must be positive".into()));
    }
    let orbit = spec.iterate(u0, n).values;
    let hist = Histogram::from_values(orbit.iter().copied(), bins);
    let mut out = orbit;
    out.extend(hist.density());
    Ok(out)
}

/// `y_1..y_n` followed by `μ_1..μ_n`.
pub fn sample_path_native(
    map: &str,
    theta: f64,
    nu: f64,
    u0: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, betarc::error::Error> {
    let (spec, gamma) = pure(map, theta, nu, u0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = simulate(&spec, &gamma, n, &mut rng, None)?;
    let mut out = path.sample.y;
    out.extend(path.mu);
    Ok(out)
}

/// Density values on `points` equally spaced points `i / (points + 1)`.
pub fn density_curve_native(
    map: &str,
    theta: f64,
    nu: f64,
    u0: f64,
    points: usize,
    method: &str,
    orbit_length: usize,
) -> Result<Vec<f64>, betarc::error::Error> {
    let (spec, gamma) = pure(map, theta, nu, u0)?;
    let method: DensityMethod = method.parse()?;
    let ys: Vec<f64> = (1..=points).map(|i| i as f64 / (points + 1) as f64).collect();
    unconditional_density_curve(&spec, &gamma, &ys, method, orbit_length)
}

#[wasm_bindgen]
pub fn orbit_and_histogram(map: &str, theta: f64, u0: f64, n: usize, bins: usize) -> Result<Vec<f64>, JsError> {
    orbit_and_histogram_native(map, theta, u0, n, bins).map_err(err)
}

#[wasm_bindgen]
pub fn sample_path(map: &str, theta: f64, nu: f64, u0: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    sample_path_native(map, theta, nu, u0, n, seed as u64).map_err(err)
}

#[wasm_bindgen]
pub fn density_curve(
    map: &str,
    theta: f64,
    nu: f64,
    u0: f64,
    points: usize,
    method: &str,
    orbit_length: usize,
) -> Result<Vec<f64>, JsError> {
    density_curve_native(map, theta, nu, u0, points, method, orbit_length).map_err(err)
}
