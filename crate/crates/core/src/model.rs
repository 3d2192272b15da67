//! The βARC process.
//!
//! The conditional mean follows
//!
//! ```text
//! g(μ_t) = α + x_t'β + Σ_{j=1}^{p} φ_j (g(y_{t-j}) - x_{t-j}'β) + h(T^{t-1}(u0))
//! ```
//!
//! and `y_t | past ~ BetaMP(μ_t, ν)`. Autoregressive terms that would reach
//! before the first observation contribute zero, and every `μ_t` is clamped
//! into `[ORBIT_EPS, 1 - ORBIT_EPS]` after the inverse link.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::betadist::{ln_gamma, BetaMP};
use crate::dynamics::{clamp_unit, MapFamily, MapSpec, ORBIT_EPS};
use crate::error::{Error, Result};

/// Link functions between `(0, 1)` and the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinkFn {
    #[default]
    Identity,
    Logit,
    Cloglog,
}

impl LinkFn {
    #[inline]
    pub fn link(self, x: f64) -> f64 {
        match self {
            LinkFn::Identity => x,
            LinkFn::Logit => (x / (1.0 - x)).ln(),
            LinkFn::Cloglog => (-(-x).ln_1p()).ln(),
        }
    }

    #[inline]
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            LinkFn::Identity => eta,
            LinkFn::Logit => 1.0 / (1.0 + (-eta).exp()),
            LinkFn::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFn::Identity => "identity",
            LinkFn::Logit => "logit",
            LinkFn::Cloglog => "cloglog",
        }
    }
}

impl fmt::Display for LinkFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(LinkFn::Identity),
            "logit" => Ok(LinkFn::Logit),
            "cloglog" => Ok(LinkFn::Cloglog),
            other => Err(Error::InvalidParameter(format!("unknown link '{other}'"))),
        }
    }
}

/// Shape of the systematic component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub g: LinkFn,
    pub h: LinkFn,
    pub map: MapFamily,
    /// Autoregressive order.
    pub p: usize,
    /// Number of covariates.
    pub l: usize,
    /// Whether `α` enters the recursion. The pure chaotic model has none.
    pub intercept: bool,
}

impl ModelSpec {
    /// `μ_t = T^{t-1}(u0)`: no covariates, no AR terms, identity links.
    pub fn pure_chaotic(map: MapFamily) -> Self {
        ModelSpec {
            g: LinkFn::Identity,
            h: LinkFn::Identity,
            map,
            p: 0,
            l: 0,
            intercept: false,
        }
    }

    /// βARC(p) with `l` covariates and an intercept.
    pub fn barc(map: MapFamily, p: usize, l: usize, g: LinkFn, h: LinkFn) -> Self {
        ModelSpec {
            g,
            h,
            map,
            p,
            l,
            intercept: true,
        }
    }

    pub fn is_pure_chaotic(&self) -> bool {
        self.p == 0
            && self.l == 0
            && self.g == LinkFn::Identity
            && self.h == LinkFn::Identity
            && !self.intercept
    }

    /// Length of the flattened parameter vector `(ν, α, β, φ, θ)`.
    pub fn dim(&self) -> usize {
        3 + self.l + self.p
    }

    /// Names of the flattened coordinates, in [`ParamVector::to_flat`] order.
    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names = vec!["nu".to_string(), "alpha".to_string()];
        names.extend((1..=self.l).map(|i| format!("beta{i}")));
        names.extend((1..=self.p).map(|j| format!("phi{j}")));
        names.push("theta".to_string());
        names
    }

    pub(crate) fn alpha_index(&self) -> usize {
        1
    }

    pub(crate) fn theta_index(&self) -> usize {
        2 + self.l + self.p
    }
}

/// Model parameters together with the orbit seed `u0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub nu: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: f64,
    pub u0: f64,
}

impl ParamVector {
    pub fn pure(nu: f64, theta: f64, u0: f64) -> Self {
        ParamVector {
            nu,
            alpha: 0.0,
            beta: Vec::new(),
            phi: Vec::new(),
            theta,
            u0,
        }
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.beta.len() != spec.l {
            return Err(Error::DimensionMismatch(format!(
                "beta has {} entries, model has {} covariates",
                self.beta.len(),
                spec.l
            )));
        }
        if self.phi.len() != spec.p {
            return Err(Error::DimensionMismatch(format!(
                "phi has {} entries, model has AR order {}",
                self.phi.len(),
                spec.p
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu = {} must be positive", self.nu)));
        }
        if !(self.u0 > 0.0 && self.u0 < 1.0) {
            return Err(Error::InvalidParameter(format!("u0 = {} must lie in (0, 1)", self.u0)));
        }
        if !spec.intercept && self.alpha != 0.0 {
            return Err(Error::InvalidParameter(
                "alpha must be zero for a model without intercept".into(),
            ));
        }
        let finite = self.alpha.is_finite()
            && self.beta.iter().all(|v| v.is_finite())
            && self.phi.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        spec.map.validate_theta(self.theta)
    }

    pub fn map(&self, spec: &ModelSpec) -> Result<MapSpec> {
        MapSpec::new(spec.map, self.theta)
    }

    /// `(ν, α, β..., φ..., θ)`; `u0` is carried separately.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + self.beta.len() + self.phi.len());
        v.push(self.nu);
        v.push(self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.phi);
        v.push(self.theta);
        v
    }

    pub fn from_flat(spec: &ModelSpec, flat: &[f64], u0: f64) -> Self {
        assert_eq!(flat.len(), spec.dim(), "flat parameter length");
        let l = spec.l;
        let p = spec.p;
        ParamVector {
            nu: flat[0],
            alpha: flat[1],
            beta: flat[2..2 + l].to_vec(),
            phi: flat[2 + l..2 + l + p].to_vec(),
            theta: flat[2 + l + p],
            u0,
        }
    }
}

/// Observations in `(0, 1)` with optional covariate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub y: Vec<f64>,
    pub x: Option<Vec<Vec<f64>>>,
    pub timestamps: Option<Vec<String>>,
}

impl SeriesSample {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        Self::with_covariates(y, None)
    }

    pub fn with_covariates(y: Vec<f64>, x: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let s = SeriesSample {
            y,
            x,
            timestamps: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.y.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::Domain(format!(
                "observation {} (index {t}) outside (0, 1)",
                self.y[t]
            )));
        }
        if let Some(x) = &self.x {
            if x.len() != self.y.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} covariate rows for {} observations",
                    x.len(),
                    self.y.len()
                )));
            }
            if let Some(first) = x.first() {
                if x.iter().any(|r| r.len() != first.len()) {
                    return Err(Error::DimensionMismatch("ragged covariate rows".into()));
                }
            }
        }
        if let Some(ts) = &self.timestamps {
            if ts.len() != self.y.len() {
                return Err(Error::DimensionMismatch("timestamp count differs from y".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn covariate_dim(&self) -> usize {
        self.x
            .as_ref()
            .and_then(|x| x.first().map(Vec::len))
            .unwrap_or(0)
    }

    /// Splits off the last `h` observations.
    pub fn split_last(&self, h: usize) -> Result<(SeriesSample, SeriesSample)> {
        if h >= self.len() {
            return Err(Error::InsufficientData(format!(
                "holdout {h} leaves no observations out of {}",
                self.len()
            )));
        }
        let cut = self.len() - h;
        let part = |r: std::ops::Range<usize>| SeriesSample {
            y: self.y[r.clone()].to_vec(),
            x: self.x.as_ref().map(|x| x[r.clone()].to_vec()),
            timestamps: self.timestamps.as_ref().map(|t| t[r.clone()].to_vec()),
        };
        Ok((part(0..cut), part(cut..self.len())))
    }
}

pub(crate) fn check_covariates(spec: &ModelSpec, x: Option<&[Vec<f64>]>, n: usize) -> Result<()> {
    match (spec.l, x) {
        (0, None) => Ok(()),
        (0, Some(rows)) if rows.iter().all(|r| r.is_empty()) => Ok(()),
        (0, Some(_)) => Err(Error::DimensionMismatch(
            "covariates supplied to a model without covariates".into(),
        )),
        (l, None) => Err(Error::DimensionMismatch(format!("model needs {l} covariates"))),
        (l, Some(rows)) => {
            if rows.len() < n {
                return Err(Error::DimensionMismatch(format!(
                    "{} covariate rows for {n} time points",
                    rows.len()
                )));
            }
            if rows.iter().any(|r| r.len() != l) {
                return Err(Error::DimensionMismatch(format!("covariate rows must have {l} entries")));
            }
            Ok(())
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear predictor recursion. `y_at(s)` must return the (observed or
/// plugged-in) value of `y` at 0-based index `s < t`.
pub(crate) struct Recursion<'a> {
    spec: &'a ModelSpec,
    gamma: &'a ParamVector,
    x: Option<&'a [Vec<f64>]>,
}

impl<'a> Recursion<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, gamma: &'a ParamVector, x: Option<&'a [Vec<f64>]>) -> Self {
        Recursion { spec, gamma, x }
    }

    #[inline]
    fn xb(&self, t: usize) -> f64 {
        match self.x {
            Some(rows) if self.spec.l > 0 => dot(&rows[t], &self.gamma.beta),
            _ => 0.0,
        }
    }

    /// `μ_t` at 0-based index `t` given the orbit value `T^t(u0)`.
    #[inline]
    pub(crate) fn mean_at<F: Fn(usize) -> f64>(&self, t: usize, orbit_value: f64, y_at: F) -> f64 {
        let spec = self.spec;
        let mut eta = self.gamma.alpha + self.xb(t);
        for (j, phi) in self.gamma.phi.iter().enumerate() {
            let lag = j + 1;
            if t >= lag {
                eta += phi * (spec.g.link(y_at(t - lag)) - self.xb(t - lag));
            }
        }
        eta += spec.h.link(orbit_value);
        clamp_unit(spec.g.inverse(eta))
    }
}

/// Conditional means `μ_1, ..., μ_n` for an observed sample.
pub fn conditional_means(spec: &ModelSpec, gamma: &ParamVector, sample: &SeriesSample) -> Result<Vec<f64>> {
    gamma.validate(spec)?;
    let n = sample.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    check_covariates(spec, sample.x.as_deref(), n)?;
    let map = gamma.map(spec)?;
    let rec = Recursion::new(spec, gamma, sample.x.as_deref());
    let y = &sample.y;
    Ok(map
        .orbit_iter(gamma.u0)
        .take(n)
        .enumerate()
        .map(|(t, z)| rec.mean_at(t, z, |s| y[s]))
        .collect())
}

/// A simulated path with its conditional means.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub sample: SeriesSample,
    pub mu: Vec<f64>,
    pub clamped_count: usize,
}

/// Generates `y_1, ..., y_n` sequentially: `μ_t` from the recursion on the
/// already generated values, then `y_t ~ BetaMP(μ_t, ν)`.
pub fn simulate<R: Rng + ?Sized>(
    spec: &ModelSpec,
    gamma: &ParamVector,
    n: usize,
    rng: &mut R,
    x: Option<Vec<Vec<f64>>>,
) -> Result<SimulatedPath> {
    gamma.validate(spec)?;
    if n == 0 {
        return Err(Error::InvalidParameter("simulation length must be positive".into()));
    }
    check_covariates(spec, x.as_deref(), n)?;
    let map = gamma.map(spec)?;
    let rec = Recursion::new(spec, gamma, x.as_deref());
    let mut y: Vec<f64> = Vec::with_capacity(n);
    let mut mu: Vec<f64> = Vec::with_capacity(n);
    let mut orbit = map.orbit_iter(gamma.u0);
    for t in 0..n {
        let z = orbit.next().expect("orbit iterator is infinite");
        let m = rec.mean_at(t, z, |s| y[s]);
        let draw = BetaMP::new(m, gamma.nu)?.sample(rng);
        mu.push(m);
        y.push(draw);
    }
    let x = x.map(|mut rows| {
        rows.truncate(n);
        rows
    });
    Ok(SimulatedPath {
        sample: SeriesSample {
            y,
            x,
            timestamps: None,
        },
        mu,
        clamped_count: orbit.clamped_count(),
    })
}

/// Unconditional moments of a pure chaotic process, estimated by orbit
/// averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalMoments {
    pub mean: f64,
    pub variance: f64,
    /// `autocovariance[h] = Cov(Y_t, Y_{t+h})`, so `autocovariance[0]` is
    /// the variance and later lags equal the orbit autocovariance.
    pub autocovariance: Vec<f64>,
}

fn require_pure(spec: &ModelSpec) -> Result<()> {
    if spec.is_pure_chaotic() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "operation requires a pure chaotic model (p = 0, l = 0, identity links, no intercept)".into(),
        ))
    }
}

/// `E(Y_t) = E(μ_t)`, `Var(Y_t) = Var(μ_t) + E(μ_t(1 - μ_t))/(1 + ν)` and
/// `Cov(Y_t, Y_{t+h}) = Cov(μ_t, μ_{t+h})`, with the `μ` moments replaced by
/// averages over an orbit of length `n`.
pub fn unconditional_moments(
    spec: &ModelSpec,
    gamma: &ParamVector,
    n: usize,
    max_lag: usize,
) -> Result<UnconditionalMoments> {
    require_pure(spec)?;
    gamma.validate(spec)?;
    if n < 2 || n < 10 * max_lag {
        return Err(Error::InsufficientData(format!(
            "orbit length {n} is too short for {max_lag} lags (need at least {})",
            (10 * max_lag).max(2)
        )));
    }
    let orbit = gamma.map(spec)?.iterate(gamma.u0, n).values;
    let nf = n as f64;
    let mean = orbit.iter().sum::<f64>() / nf;
    let var_mu = orbit.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / nf;
    let mean_cond_var = orbit.iter().map(|m| m * (1.0 - m)).sum::<f64>() / nf / (1.0 + gamma.nu);
    let variance = var_mu + mean_cond_var;
    let mut autocovariance = Vec::with_capacity(max_lag + 1);
    autocovariance.push(variance);
    for h in 1..=max_lag {
        let c = orbit
            .iter()
            .zip(&orbit[h..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (n - h) as f64;
        autocovariance.push(c);
    }
    Ok(UnconditionalMoments {
        mean,
        variance,
        autocovariance,
    })
}

/// How the unconditional density integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    /// Numerical integration against the closed-form invariant density.
    Quadrature,
    /// Birkhoff average of the conditional density along an orbit.
    OrbitMc,
}

impl FromStr for DensityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadrature" | "quad" => Ok(DensityMethod::Quadrature),
            "orbit" | "orbit_mc" | "orbitmc" | "mc" => Ok(DensityMethod::OrbitMc),
            other => Err(Error::InvalidParameter(format!("unknown density method '{other}'"))),
        }
    }
}

/// Unconditional density `f_Y(y) = ∫ f(y | z) λ_T(dz)` of a pure chaotic
/// model at a single point.
pub fn unconditional_density(
    spec: &ModelSpec,
    gamma: &ParamVector,
    y: f64,
    method: DensityMethod,
    n: usize,
) -> Result<f64> {
    Ok(unconditional_density_curve(spec, gamma, &[y], method, n)?[0])
}

/// [`unconditional_density`] over a set of points, sharing one orbit.
pub fn unconditional_density_curve(
    spec: &ModelSpec,
    gamma: &ParamVector,
    ys: &[f64],
    method: DensityMethod,
    n: usize,
) -> Result<Vec<f64>> {
    require_pure(spec)?;
    gamma.validate(spec)?;
    if let Some(&bad) = ys.iter().find(|&&y| !(y > 0.0 && y < 1.0)) {
        return Err(Error::Domain(format!("density point {bad} outside (0, 1)")));
    }
    let map = gamma.map(spec)?;
    let nu = gamma.nu;
    let lg_nu = ln_gamma(nu);
    match method {
        DensityMethod::Quadrature => {
            if !map.has_invariant_density() {
                return Err(Error::DensityUnavailable(map.to_string()));
            }
            Ok(ys
                .iter()
                .map(|&y| {
                    let (ly, l1y) = (y.ln(), (-y).ln_1p());
                    let integrand = |z: f64| {
                        let (a, b) = (nu * z, nu * (1.0 - z));
                        let lf = lg_nu - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * ly + (b - 1.0) * l1y;
                        lf.exp() * map.invariant_density(z).unwrap_or(0.0)
                    };
                    // the integrand concentrates around z = y with spread ~ sqrt(y(1-y)/ν)
                    let spread = (y * (1.0 - y) / (1.0 + nu)).sqrt();
                    let mut cuts = vec![ORBIT_EPS];
                    for k in [-8.0, -2.0, 0.0, 2.0, 8.0] {
                        let c = y + k * spread;
                        if c > ORBIT_EPS && c < 1.0 - ORBIT_EPS {
                            cuts.push(c);
                        }
                    }
                    cuts.push(1.0 - ORBIT_EPS);
                    cuts.windows(2)
                        .map(|w| quadrature::double_exponential::integrate(integrand, w[0], w[1], 1e-11).integral)
                        .sum::<f64>()
                })
                .collect())
        }
        DensityMethod::OrbitMc => {
            if n == 0 {
                return Err(Error::InvalidParameter("orbit length must be positive".into()));
            }
            // per-point constant and shapes; the y-dependence is separable
            let terms: Vec<(f64, f64, f64)> = map
                .orbit_iter(gamma.u0)
                .take(n)
                .map(|z| {
                    let (a, b) = (nu * z, nu * (1.0 - z));
                    (lg_nu - ln_gamma(a) - ln_gamma(b), a - 1.0, b - 1.0)
                })
                .collect();
            Ok(ys
                .iter()
                .map(|&y| {
                    let (ly, l1y) = (y.ln(), (-y).ln_1p());
                    terms.iter().map(|(c, a1, b1)| (c + a1 * ly + b1 * l1y).exp()).sum::<f64>() / n as f64
                })
                .collect())
        }
    }
}
