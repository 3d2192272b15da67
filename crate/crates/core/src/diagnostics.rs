//! Residual checks, forecasts and accuracy measures.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::model::{check_covariates, ModelSpec, Recursion, SeriesSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    InSample,
    OutOfSample,
}

/// Error measures for `e_t = actual_t - predicted_t`. Percentages are in
/// percent units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mape: f64,
    pub mpe: f64,
    pub me: f64,
    pub mae: f64,
    pub rmse: f64,
    pub horizon: Horizon,
}

pub fn accuracy(actual: &[f64], predicted: &[f64], horizon: Horizon) -> Result<AccuracyReport> {
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} actual values, {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InsufficientData("accuracy needs at least one point".into()));
    }
    if let Some(i) = actual.iter().position(|a| *a == 0.0) {
        return Err(Error::Domain(format!("actual value at index {i} is zero")));
    }
    let n = actual.len() as f64;
    let (mut me, mut mae, mut mse, mut mpe, mut mape) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, p) in actual.iter().zip(predicted) {
        let e = a - p;
        me += e;
        mae += e.abs();
        mse += e * e;
        mpe += e / a;
        mape += e.abs() / a.abs();
    }
    Ok(AccuracyReport {
        mape: 100.0 * mape / n,
        mpe: 100.0 * mpe / n,
        me: me / n,
        mae: mae / n,
        rmse: (mse / n).sqrt(),
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBoxResult {
    pub statistic: f64,
    pub lags: usize,
    pub dof: usize,
    pub p_value: f64,
}

/// Ljung-Box portmanteau test over `m` lags, referred to `χ²(m)`.
pub fn ljung_box(residuals: &[f64], m: usize) -> Result<LjungBoxResult> {
    let n = residuals.len();
    if m == 0 {
        return Err(Error::InvalidParameter("Ljung-Box needs at least one lag".into()));
    }
    if n <= m {
        return Err(Error::InsufficientData(format!("{n} residuals for {m} lags")));
    }
    let (lo, hi) = residuals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    if !(hi > lo) {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    let nf = n as f64;
    let mut q = 0.0;
    for k in 1..=m {
        let ck: f64 = centered[k..].iter().zip(&centered).map(|(a, b)| a * b).sum();
        let rho = ck / c0;
        q += rho * rho / (nf - k as f64);
    }
    let statistic = nf * (nf + 2.0) * q;
    let chi = ChiSquared::new(m as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(LjungBoxResult {
        statistic,
        lags: m,
        dof: m,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
    })
}

/// Predicted means `μ̂_{n+1}, ..., μ̂_{n+h}` after the sample. The orbit is
/// continued from the fitted `u0`; autoregressive terms use earlier
/// forecasts where the observation is not available.
pub fn forecast(
    spec: &ModelSpec,
    fit: &FitResult,
    sample: &SeriesSample,
    h: usize,
    x_future: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be positive".into()));
    }
    let gamma = &fit.gamma_hat;
    gamma.validate(spec)?;
    sample.validate()?;
    let n = sample.len();
    check_covariates(spec, sample.x.as_deref(), n)?;

    let rows: Option<Vec<Vec<f64>>> = if spec.l > 0 {
        let future = x_future.ok_or_else(|| {
            Error::DimensionMismatch(format!("model needs {} covariates for {h} future steps", spec.l))
        })?;
        if future.len() < h {
            return Err(Error::DimensionMismatch(format!(
                "{} future covariate rows for {h} steps",
                future.len()
            )));
        }
        let mut all = sample.x.clone().unwrap_or_default();
        all.truncate(n);
        all.extend(future[..h].iter().cloned());
        check_covariates(spec, Some(&all), n + h)?;
        Some(all)
    } else {
        None
    };

    let map = gamma.map(spec)?;
    let rec = Recursion::new(spec, gamma, rows.as_deref());
    let mut path = sample.y.clone();
    let mut out = Vec::with_capacity(h);
    for (t, z) in map.orbit_iter(gamma.u0).enumerate().skip(n).take(h) {
        let m = rec.mean_at(t, z, |s| path[s]);
        path.push(m);
        out.push(m);
    }
    Ok(out)
}

/// A fitted model with its in-sample accuracy and residual test.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub fit: FitResult,
    pub accuracy_in: AccuracyReport,
    pub ljung_box: LjungBoxResult,
}

impl Candidate {
    /// Every free regression coefficient (intercept, covariates, AR terms)
    /// has a Wald p-value below `level`. Precision and map parameters are
    /// not tested.
    pub fn coefficients_significant(&self, level: f64) -> bool {
        let Some(wald) = &self.fit.wald else {
            return false;
        };
        let regression = |name: &str| name == "alpha" || name.starts_with("beta") || name.starts_with("phi");
        wald.names
            .iter()
            .zip(&wald.p_values)
            .filter(|(name, _)| regression(name))
            .all(|(_, p)| p.is_some_and(|p| p < level))
    }

    pub fn admissible(&self, level: f64) -> bool {
        self.coefficients_significant(level) && self.ljung_box.p_value >= level
    }
}

/// Indices into the candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub best_by_mape_in: usize,
    pub best_by_loglik: usize,
    /// Candidates that survived the filter.
    pub admissible: usize,
}

/// Keeps candidates whose regression coefficients are significant at 5%
/// and whose residuals pass the Ljung-Box test at 5%, then picks the
/// smallest in-sample MAPE and the largest log-likelihood. Ties go to the
/// smaller AIC.
pub fn model_select(candidates: &[Candidate]) -> Result<Selection> {
    const LEVEL: f64 = 0.05;
    let kept: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].admissible(LEVEL))
        .collect();
    if kept.is_empty() {
        return Err(Error::NoCandidates);
    }
    let aic = |i: usize| candidates[i].fit.aic;
    let pick = |key: &dyn Fn(usize) -> f64| {
        kept.iter()
            .copied()
            .min_by(|&a, &b| key(a).total_cmp(&key(b)).then(aic(a).total_cmp(&aic(b))))
            .expect("non-empty")
    };
    Ok(Selection {
        best_by_mape_in: pick(&|i| candidates[i].accuracy_in.mape),
        best_by_loglik: pick(&|i| -candidates[i].fit.loglik),
        admissible: kept.len(),
    })
}
