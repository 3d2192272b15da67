//! Partial maximum likelihood estimation.
//!
//! The log-likelihood `Σ_t log f(y_t | μ_t, ν)` is maximized over the free
//! coordinates of `(ν, α, β, φ, θ)` with `u0` held fixed. Each coordinate is
//! boxed and optimized through a `sin²` reparameterization; the search runs
//! Nelder-Mead from several precision starts (optionally after an L-BFGS
//! stage) and keeps the best terminal point. `u0` itself is profiled over a
//! grid by [`fit_u0_grid`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::betadist::{ln_gamma, log_density_unchecked};
use crate::dynamics::MapFamily;
use crate::error::{Error, Result};
use crate::model::{check_covariates, conditional_means, ModelSpec, ParamVector, Recursion, SeriesSample};
use crate::optim::{BoxTransform, Lbfgs, NelderMead};

/// Lower end of the `u0` search range.
pub const U0_MIN: f64 = PI / 1000.0;
/// Upper end of the `u0` search range.
pub const U0_MAX: f64 = 1.0 - PI / 1000.0;

/// Box constraints on the flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub u0: (f64, f64),
}

impl Bounds {
    /// `ν ∈ [1e-3, 1e4]`, coefficients in `[-50, 50]`, `θ` inside its
    /// search domain shrunk by `1e-6`, `u0 ∈ [π/1000, 1 - π/1000]`.
    ///
    /// The Bernoulli `k` is discrete; its bounds collapse onto `theta`.
    pub fn default_for(spec: &ModelSpec, theta: f64) -> Self {
        let dim = spec.dim();
        let mut lower = vec![-50.0; dim];
        let mut upper = vec![50.0; dim];
        lower[0] = 1e-3;
        upper[0] = 1e4;
        let ti = spec.theta_index();
        match spec.map.estimation_domain() {
            Some((lo, hi)) => {
                lower[ti] = lo + 1e-6;
                upper[ti] = hi - 1e-6;
            }
            None => {
                lower[ti] = theta;
                upper[ti] = theta;
            }
        }
        Bounds {
            lower,
            upper,
            u0: (U0_MIN, U0_MAX),
        }
    }

    pub fn contains(&self, flat: &[f64]) -> bool {
        flat.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

/// Settings for [`fit`] and [`fit_u0_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Starting values. Fixed coordinates keep these values. When absent,
    /// `α = g(ȳ)`, `β = 0`, `φ = 0` and `θ` is the midpoint of its domain.
    pub initial: Option<ParamVector>,
    /// Fixed orbit seed. Overrides `initial.u0`; defaults to `1/2`.
    pub u0: Option<f64>,
    /// Mask over `(ν, α, β, φ, θ)`. Defaults to every coordinate except the
    /// intercept of a model without one and the Bernoulli `k`.
    pub free: Option<Vec<bool>>,
    /// Precision values used as multistart points.
    pub nu_starts: Vec<f64>,
    pub max_iter: usize,
    pub ftol: f64,
    /// Run L-BFGS before Nelder-Mead from every start.
    pub two_stage: bool,
    pub bounds: Option<Bounds>,
    /// Compute the Wald table for the returned fit.
    pub wald: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            initial: None,
            u0: None,
            free: None,
            nu_starts: vec![5.0, 50.0, 100.0],
            max_iter: 5000,
            ftol: 1e-8,
            two_stage: false,
            bounds: None,
            wald: true,
        }
    }
}

impl FitOptions {
    /// Estimate `ν` only; everything else is taken from `truth`.
    pub fn nu_only(spec: &ModelSpec, truth: &ParamVector) -> Self {
        let mut free = vec![false; spec.dim()];
        free[0] = true;
        FitOptions {
            initial: Some(truth.clone()),
            free: Some(free),
            ..FitOptions::default()
        }
    }
}

/// Terminal point reached from one multistart precision value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub nu_start: f64,
    pub loglik: f64,
    pub converged: bool,
}

/// Wald `z` table for the free coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldTable {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    /// `None` where the Hessian gives no usable curvature.
    pub se: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    /// Set when at least one coordinate could not be assigned a standard error.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub gamma_hat: ParamVector,
    pub free: Vec<bool>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Number of estimated parameters (`u0` excluded).
    pub k: usize,
    pub n: usize,
    pub wald: Option<WaldTable>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub starts: Vec<StartOutcome>,
    pub u0_grid_trace: Option<Vec<(f64, f64)>>,
}

impl FitResult {
    pub fn se(&self) -> Vec<Option<f64>> {
        self.wald.as_ref().map(|w| w.se.clone()).unwrap_or_default()
    }

    pub fn p_values(&self) -> Vec<Option<f64>> {
        self.wald.as_ref().map(|w| w.p_values.clone()).unwrap_or_default()
    }
}

/// `AIC = -2ℓ + 2k`, `BIC = -2ℓ + k log n`.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let k = k as f64;
    (-2.0 * loglik + 2.0 * k, -2.0 * loglik + k * (n as f64).ln())
}

/// Partial log-likelihood. Non-finite totals are reported as `-∞`.
pub fn loglik(spec: &ModelSpec, gamma: &ParamVector, sample: &SeriesSample) -> Result<f64> {
    gamma.validate(spec)?;
    sample.validate()?;
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    check_covariates(spec, sample.x.as_deref(), sample.len())?;
    let v = loglik_unchecked(spec, gamma, sample);
    Ok(if v.is_finite() { v } else { f64::NEG_INFINITY })
}

/// Log-likelihood without input validation beyond parameter validity;
/// returns `-∞` for invalid parameters.
fn loglik_unchecked(spec: &ModelSpec, gamma: &ParamVector, sample: &SeriesSample) -> f64 {
    if !(gamma.nu > 0.0) || spec.map.validate_theta(gamma.theta).is_err() {
        return f64::NEG_INFINITY;
    }
    let Ok(map) = gamma.map(spec) else {
        return f64::NEG_INFINITY;
    };
    let rec = Recursion::new(spec, gamma, sample.x.as_deref());
    let y = &sample.y;
    let nu = gamma.nu;
    let lg_nu = ln_gamma(nu);
    let mut total = 0.0;
    for (t, z) in map.orbit_iter(gamma.u0).take(y.len()).enumerate() {
        let mu = rec.mean_at(t, z, |s| y[s]);
        total += log_density_unchecked(mu, nu, lg_nu, y[t]);
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

fn default_free(spec: &ModelSpec) -> Vec<bool> {
    let mut free = vec![true; spec.dim()];
    if !spec.intercept {
        free[spec.alpha_index()] = false;
    }
    if spec.map == MapFamily::Bernoulli {
        free[spec.theta_index()] = false;
    }
    free
}

/// Starting point used when [`FitOptions::initial`] is absent: `ν = 50`,
/// `α = g(ȳ)`, zero slopes and `θ` at the midpoint of its domain unless
/// `theta` is given. A Bernoulli map always needs `theta`.
pub fn default_start(spec: &ModelSpec, sample: &SeriesSample, theta: Option<f64>, u0: f64) -> Result<ParamVector> {
    let theta = match (theta, spec.map.estimation_domain()) {
        (Some(t), _) => t,
        (None, Some((lo, hi))) => 0.5 * (lo + hi),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "a Bernoulli map needs its k supplied through FitOptions::initial".into(),
            ))
        }
    };
    let ybar = sample.y.iter().sum::<f64>() / sample.len() as f64;
    let alpha = if spec.intercept { spec.g.link(ybar) } else { 0.0 };
    Ok(ParamVector {
        nu: 50.0,
        alpha,
        beta: vec![0.0; spec.l],
        phi: vec![0.0; spec.p],
        theta,
        u0,
    })
}

/// Everything needed to run the optimizer for one fixed `u0`.
struct Problem<'a> {
    spec: &'a ModelSpec,
    sample: &'a SeriesSample,
    base: Vec<f64>,
    free_idx: Vec<usize>,
    transform: BoxTransform,
    u0: f64,
}

impl<'a> Problem<'a> {
    fn new(
        spec: &'a ModelSpec,
        sample: &'a SeriesSample,
        base: Vec<f64>,
        free: &[bool],
        bounds: &Bounds,
        u0: f64,
    ) -> Result<Self> {
        let free_idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
        for &i in &free_idx {
            if !(bounds.lower[i] < bounds.upper[i]) {
                return Err(Error::InvalidParameter(format!(
                    "coordinate {} is free but has an empty box",
                    spec.coordinate_names()[i]
                )));
            }
        }
        let transform = BoxTransform::new(
            free_idx.iter().map(|&i| bounds.lower[i]).collect(),
            free_idx.iter().map(|&i| bounds.upper[i]).collect(),
        );
        Ok(Problem {
            spec,
            sample,
            base,
            free_idx,
            transform,
            u0,
        })
    }

    fn external(&self, z: &[f64]) -> Vec<f64> {
        let mut flat = self.base.clone();
        let xs = self.transform.to_external(z);
        for (&i, v) in self.free_idx.iter().zip(xs) {
            flat[i] = v;
        }
        flat
    }

    fn neg_loglik_flat(&self, flat: &[f64]) -> f64 {
        let gamma = ParamVector::from_flat(self.spec, flat, self.u0);
        -loglik_unchecked(self.spec, &gamma, self.sample)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.neg_loglik_flat(&self.external(z))
    }

    /// Runs the optimizer from `start`; returns the terminal flat vector,
    /// its log-likelihood and the convergence flag.
    fn run(&self, start: &[f64], options: &FitOptions) -> (Vec<f64>, f64, bool) {
        let x0: Vec<f64> = self.free_idx.iter().map(|&i| start[i]).collect();
        let mut z0 = self.transform.to_internal(&x0);
        if options.two_stage {
            let q = Lbfgs::default().minimize(|z| self.objective(z), &z0);
            if q.fx.is_finite() {
                z0 = q.x;
            }
        }
        let nm = NelderMead {
            max_iter: options.max_iter,
            ftol: options.ftol,
            ..NelderMead::default()
        };
        let r = nm.minimize(|z| self.objective(z), &z0);
        let flat = self.external(&r.x);
        (flat, -r.fx, r.converged)
    }
}

struct Optimum {
    flat: Vec<f64>,
    loglik: f64,
    converged: bool,
    starts: Vec<StartOutcome>,
}

fn resolve(
    spec: &ModelSpec,
    sample: &SeriesSample,
    options: &FitOptions,
) -> Result<(ParamVector, Vec<bool>, Bounds)> {
    sample.validate()?;
    let n = sample.len();
    if n <= spec.p {
        return Err(Error::InsufficientData(format!(
            "{n} observations for an AR order of {}",
            spec.p
        )));
    }
    check_covariates(spec, sample.x.as_deref(), n)?;
    let u0 = options
        .u0
        .or(options.initial.as_ref().map(|g| g.u0))
        .unwrap_or(0.5);
    let mut base = match &options.initial {
        Some(g) => g.clone(),
        None => default_start(spec, sample, None, u0)?,
    };
    base.u0 = u0;
    base.validate(spec)?;
    let free = options.free.clone().unwrap_or_else(|| default_free(spec));
    if free.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "free mask has {} entries, parameter vector has {}",
            free.len(),
            spec.dim()
        )));
    }
    if spec.map == MapFamily::Bernoulli && free[spec.theta_index()] {
        return Err(Error::InvalidParameter("the Bernoulli k cannot be estimated".into()));
    }
    if !spec.intercept && free[spec.alpha_index()] {
        return Err(Error::InvalidParameter("model has no intercept to estimate".into()));
    }
    let bounds = options
        .bounds
        .clone()
        .unwrap_or_else(|| Bounds::default_for(spec, base.theta));
    if bounds.lower.len() != spec.dim() || bounds.upper.len() != spec.dim() {
        return Err(Error::DimensionMismatch("bounds length".into()));
    }
    Ok((base, free, bounds))
}

fn optimize_fixed_u0(
    spec: &ModelSpec,
    sample: &SeriesSample,
    base: &ParamVector,
    free: &[bool],
    bounds: &Bounds,
    options: &FitOptions,
    u0: f64,
) -> Result<Optimum> {
    let mut flat = base.to_flat();
    for i in 0..flat.len() {
        if free[i] {
            flat[i] = flat[i].clamp(bounds.lower[i], bounds.upper[i]);
        }
    }
    let problem = Problem::new(spec, sample, flat.clone(), free, bounds, u0)?;
    let nu_starts: Vec<f64> = if free[0] && !options.nu_starts.is_empty() {
        options.nu_starts.clone()
    } else {
        vec![flat[0]]
    };

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut starts = Vec::with_capacity(nu_starts.len());
    for &nu0 in &nu_starts {
        let mut start = flat.clone();
        start[0] = nu0.clamp(bounds.lower[0], bounds.upper[0]);
        let (x, ll, conv) = problem.run(&start, options);
        starts.push(StartOutcome {
            nu_start: nu0,
            loglik: ll,
            converged: conv,
        });
        if best.as_ref().is_none_or(|(_, b, _)| ll > *b) {
            best = Some((x, ll, conv));
        }
    }
    let (flat, loglik, converged) = best.expect("at least one start");
    if !loglik.is_finite() {
        return Err(Error::Numerical("log-likelihood is not finite at any start".into()));
    }
    Ok(Optimum {
        flat,
        loglik,
        converged,
        starts,
    })
}

fn finish(
    spec: &ModelSpec,
    sample: &SeriesSample,
    free: Vec<bool>,
    bounds: &Bounds,
    opt: Optimum,
    u0: f64,
    wald: bool,
    trace: Option<Vec<(f64, f64)>>,
) -> Result<FitResult> {
    let gamma_hat = ParamVector::from_flat(spec, &opt.flat, u0);
    let fitted = conditional_means(spec, &gamma_hat, sample)?;
    let residuals = sample.y.iter().zip(&fitted).map(|(y, m)| y - m).collect();
    let k = free.iter().filter(|&&f| f).count();
    let n = sample.len();
    let (aic, bic) = information_criteria(opt.loglik, k, n);
    let wald = if wald {
        Some(wald_table(spec, &gamma_hat, sample, &free, bounds))
    } else {
        None
    };
    Ok(FitResult {
        spec: *spec,
        gamma_hat,
        free,
        loglik: opt.loglik,
        aic,
        bic,
        k,
        n,
        wald,
        fitted,
        residuals,
        converged: opt.converged,
        starts: opt.starts,
        u0_grid_trace: trace,
    })
}

/// Maximizes the partial log-likelihood with `u0` held fixed.
pub fn fit(spec: &ModelSpec, sample: &SeriesSample, options: &FitOptions) -> Result<FitResult> {
    let (base, free, bounds) = resolve(spec, sample, options)?;
    let u0 = base.u0;
    let opt = optimize_fixed_u0(spec, sample, &base, &free, &bounds, options, u0)?;
    finish(spec, sample, free, &bounds, opt, u0, options.wald, None)
}

/// `grid_size` equally spaced points covering the `u0` search range.
pub fn u0_grid(grid_size: usize, range: (f64, f64)) -> Vec<f64> {
    match grid_size {
        0 => Vec::new(),
        1 => vec![range.0],
        g => (0..g)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (g - 1) as f64)
            .collect(),
    }
}

/// Fits the model once per `u0` grid point and keeps the best fit. Ties go
/// to the smallest `u0`. Grid points are evaluated in parallel.
pub fn fit_u0_grid(
    spec: &ModelSpec,
    sample: &SeriesSample,
    options: &FitOptions,
    grid_size: usize,
) -> Result<FitResult> {
    if grid_size == 0 {
        return Err(Error::InvalidParameter("u0 grid must have at least one point".into()));
    }
    let (base, free, bounds) = resolve(spec, sample, options)?;
    let grid = u0_grid(grid_size, bounds.u0);
    let outcomes: Vec<Result<Optimum>> = grid
        .par_iter()
        .map(|&u0| {
            let mut b = base.clone();
            b.u0 = u0;
            optimize_fixed_u0(spec, sample, &b, &free, &bounds, options, u0)
        })
        .collect();

    let mut trace = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, Optimum)> = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(opt) => {
                trace.push((grid[i], opt.loglik));
                if best.as_ref().is_none_or(|(_, b)| opt.loglik > b.loglik) {
                    best = Some((i, opt));
                }
            }
            Err(_) => trace.push((grid[i], f64::NEG_INFINITY)),
        }
    }
    let (i, opt) = best.ok_or_else(|| Error::Numerical("no grid point produced a finite fit".into()))?;
    finish(spec, sample, free, &bounds, opt, grid[i], options.wald, Some(trace))
}

fn standard_normal_two_sided(z: f64) -> f64 {
    let normal = Normal::standard();
    (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0)
}

/// Wald `z` tests of `H0: γ_i = 0` from the numerical Hessian of the
/// negative log-likelihood over the free coordinates (default mask).
pub fn wald_inference(spec: &ModelSpec, gamma_hat: &ParamVector, sample: &SeriesSample) -> Result<WaldTable> {
    gamma_hat.validate(spec)?;
    sample.validate()?;
    check_covariates(spec, sample.x.as_deref(), sample.len())?;
    let free = default_free(spec);
    let bounds = Bounds::default_for(spec, gamma_hat.theta);
    Ok(wald_table(spec, gamma_hat, sample, &free, &bounds))
}

/// Same as [`wald_inference`] with an explicit free mask and box.
pub fn wald_inference_with(
    spec: &ModelSpec,
    gamma_hat: &ParamVector,
    sample: &SeriesSample,
    free: &[bool],
    bounds: &Bounds,
) -> Result<WaldTable> {
    gamma_hat.validate(spec)?;
    sample.validate()?;
    check_covariates(spec, sample.x.as_deref(), sample.len())?;
    if free.len() != spec.dim() {
        return Err(Error::DimensionMismatch("free mask length".into()));
    }
    Ok(wald_table(spec, gamma_hat, sample, free, bounds))
}

fn wald_table(
    spec: &ModelSpec,
    gamma_hat: &ParamVector,
    sample: &SeriesSample,
    free: &[bool],
    bounds: &Bounds,
) -> WaldTable {
    let names_all = spec.coordinate_names();
    let x = gamma_hat.to_flat();
    let idx: Vec<usize> = (0..x.len()).filter(|&i| free[i]).collect();
    let names: Vec<String> = idx.iter().map(|&i| names_all[i].clone()).collect();
    let estimates: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let steps: Vec<f64> = idx.iter().map(|&i| (1e-4 * x[i].abs()).max(1e-4)).collect();

    // coordinates whose difference stencil leaves the box carry no curvature
    let usable: Vec<usize> = (0..idx.len())
        .filter(|&a| {
            let i = idx[a];
            x[i] - steps[a] >= bounds.lower[i] && x[i] + steps[a] <= bounds.upper[i]
        })
        .collect();

    let f = |flat: &[f64]| -> f64 {
        let g = ParamVector::from_flat(spec, flat, gamma_hat.u0);
        -loglik_unchecked(spec, &g, sample)
    };
    let f0 = f(&x);
    let m = usable.len();
    let mut hess = DMatrix::<f64>::zeros(m, m);
    let shifted = |moves: &[(usize, f64)]| -> f64 {
        let mut p = x.clone();
        for &(i, d) in moves {
            p[i] += d;
        }
        f(&p)
    };
    for a in 0..m {
        let (i, hi) = (idx[usable[a]], steps[usable[a]]);
        let fp = shifted(&[(i, hi)]);
        let fm = shifted(&[(i, -hi)]);
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for b in 0..a {
            let (j, hj) = (idx[usable[b]], steps[usable[b]]);
            let fpp = shifted(&[(i, hi), (j, hj)]);
            let fpm = shifted(&[(i, hi), (j, -hj)]);
            let fmp = shifted(&[(i, -hi), (j, hj)]);
            let fmm = shifted(&[(i, -hi), (j, -hj)]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }

    let mut se = vec![None; idx.len()];
    let finite = hess.iter().all(|v| v.is_finite());
    if finite && m > 0 {
        // drop directions without curvature before inverting
        let scale = (0..m).map(|a| hess[(a, a)].abs()).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..m).filter(|&a| hess[(a, a)] > 1e-12 * scale.max(1e-300)).collect();
        let sub = DMatrix::from_fn(keep.len(), keep.len(), |r, c| hess[(keep[r], keep[c])]);
        if let Some(inv) = sub.try_inverse() {
            for (r, &a) in keep.iter().enumerate() {
                let v = inv[(r, r)];
                if v.is_finite() && v > 0.0 {
                    se[usable[a]] = Some(v.sqrt());
                }
            }
        }
    }
    let p_values: Vec<Option<f64>> = se
        .iter()
        .zip(&estimates)
        .map(|(s, e)| s.map(|s| standard_normal_two_sided(e / s)))
        .collect();
    let undefined = se.iter().any(Option::is_none);
    WaldTable {
        names,
        estimates,
        se,
        p_values,
        undefined,
    }
}
