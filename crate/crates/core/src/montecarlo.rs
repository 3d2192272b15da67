//! Replicated simulate-and-fit experiments for the precision estimator.
//!
//! Every replicate draws from its own generator, seeded by mixing the
//! master seed, the cell index and the replicate index. Results therefore
//! do not depend on how replicates are scheduled across threads.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::MapFamily;
use crate::error::{Error, Result};
use crate::estimation::{fit, FitOptions};
use crate::model::{simulate, ModelSpec, ParamVector};

/// Which coordinates each replicate estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    /// Only `ν`; the map parameter and `u0` are known.
    #[default]
    NuOnly,
    /// Every free coordinate of the pure chaotic model.
    All,
}

/// A grid of pure chaotic scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub map: MapFamily,
    pub thetas: Vec<f64>,
    pub u0s: Vec<f64>,
    pub ns: Vec<usize>,
    pub nu: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub estimate: Estimate,
}

impl McConfig {
    /// Bernoulli maps `k ∈ {3, 5, 7}`, `u0 ∈ {0.2, 0.5, 0.8} + π/100`,
    /// `n ∈ {100, 500, 1000}`, `ν = 40`.
    pub fn table1(replicates: usize, seed: u64) -> Self {
        McConfig {
            map: MapFamily::Bernoulli,
            thetas: vec![3.0, 5.0, 7.0],
            u0s: vec![0.2 + PI / 100.0, 0.5 + PI / 100.0, 0.8 + PI / 100.0],
            ns: vec![100, 500, 1000],
            nu: 40.0,
            replicates,
            seed,
            estimate: Estimate::NuOnly,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.thetas.is_empty() || self.u0s.is_empty() || self.ns.is_empty() {
            return Err(Error::Config("theta, u0 and n lists must be non-empty".into()));
        }
        for &th in &self.thetas {
            self.map.validate_theta(th).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(u) = self.u0s.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(Error::Config(format!("u0 = {u} must lie in (0, 1)")));
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 10) {
            return Err(Error::Config(format!("sample size {n} is below 10")));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("nu = {} must be positive", self.nu)));
        }
        if self.estimate == Estimate::All && self.map == MapFamily::Bernoulli {
            // k is discrete, so "all" reduces to ν
            return Ok(());
        }
        Ok(())
    }

    /// `(theta, u0, n)` for every cell, theta varying slowest.
    pub fn cells(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.thetas.len() * self.u0s.len() * self.ns.len());
        for &th in &self.thetas {
            for &u in &self.u0s {
                for &n in &self.ns {
                    out.push((th, u, n));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub theta: f64,
    pub u0: f64,
    pub n: usize,
    /// Mean of the precision estimates.
    pub mean: f64,
    /// Sample standard deviation (zero for a single replicate).
    pub sd: f64,
    /// `100 · mean |ν̂ - ν| / ν`.
    pub mape: f64,
    pub failures: usize,
    /// More than 2% of the replicates failed to produce an estimate.
    pub failed: bool,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub config: McConfig,
    pub cells: Vec<CellSummary>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` in cell `cell`.
pub fn replicate_seed(master: u64, cell: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ replicate)
}

pub fn replicate_rng(master: u64, cell: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replicate_seed(master, cell, replicate))
}

fn one_replicate(cfg: &McConfig, cell: usize, (theta, u0, n): (f64, f64, usize), r: usize) -> Result<f64> {
    let spec = ModelSpec::pure_chaotic(cfg.map);
    let truth = ParamVector::pure(cfg.nu, theta, u0);
    let mut rng = replicate_rng(cfg.seed, cell as u64, r as u64);
    let path = simulate(&spec, &truth, n, &mut rng, None)?;
    let mut options = match cfg.estimate {
        Estimate::NuOnly => FitOptions::nu_only(&spec, &truth),
        Estimate::All => FitOptions {
            initial: Some(truth.clone()),
            ..FitOptions::default()
        },
    };
    options.wald = false;
    let result = fit(&spec, &path.sample, &options)?;
    Ok(result.gamma_hat.nu)
}

fn summarize(cfg: &McConfig, (theta, u0, n): (f64, f64, usize), outcomes: Vec<Result<f64>>) -> CellSummary {
    let total = outcomes.len();
    let estimates: Vec<f64> = outcomes.into_iter().filter_map(|r| r.ok()).collect();
    let failures = total - estimates.len();
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let sd = if estimates.len() > 1 {
        (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let mape = 100.0 * estimates.iter().map(|e| (e - cfg.nu).abs()).sum::<f64>() / m / cfg.nu;
    CellSummary {
        theta,
        u0,
        n,
        mean,
        sd,
        mape,
        failures,
        failed: failures as f64 > 0.02 * total as f64,
        estimates,
    }
}

/// Runs every cell of the design.
pub fn run_mc(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let cells = cfg.cells();
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, &cell)| {
            let outcomes: Vec<Result<f64>> = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| one_replicate(cfg, c, cell, r))
                .collect();
            summarize(cfg, cell, outcomes)
        })
        .collect();
    Ok(McSummary {
        config: cfg.clone(),
        cells: summaries,
    })
}

/// Result of the Shapiro-Wilk test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub statistic: f64,
    pub p_value: f64,
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro-Wilk normality test (Royston's approximation), `3 <= n <= 5000`.
pub fn normality_probe(estimates: &[f64]) -> Result<ShapiroWilk> {
    let n = estimates.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "Shapiro-Wilk needs between 3 and 5000 values, got {n}"
        )));
    }
    if estimates.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in sample".into()));
    }
    let mut x = estimates.to_vec();
    x.sort_by(f64::total_cmp);
    if x[n - 1] - x[0] <= 0.0 {
        return Err(Error::Degenerate("sample has zero variance".into()));
    }

    let half = n / 2;
    let nf = n as f64;
    let normal = Normal::standard();
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = 0.5f64.sqrt();
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let m: Vec<f64> = (1..=half)
            .map(|i| normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first..half {
            a[i] = -m[i] / fac;
        }
    }

    let mean = x.iter().sum::<f64>() / nf;
    let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let b: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let w = (b * b / ss).min(1.0);

    let p_value = if n == 3 {
        let pi6 = 6.0 / PI;
        let stqr = PI / 3.0;
        (pi6 * (w.sqrt().asin() - stqr)).max(0.0)
    } else {
        let w1 = (1.0 - w).max(f64::MIN_POSITIVE);
        let mut y = w1.ln();
        let (mu, sigma) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok(ShapiroWilk {
                    statistic: w,
                    p_value: 1e-99,
                });
            }
            y = -(gamma - y).ln();
            (
                poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf),
                poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp(),
            )
        } else {
            let ln_n = nf.ln();
            (
                poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n),
                poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp(),
            )
        };
        normal.sf((y - mu) / sigma)
    };
    Ok(ShapiroWilk {
        statistic: w,
        p_value: p_value.clamp(0.0, 1.0),
    })
}
