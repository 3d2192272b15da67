//! JSON document produced by `betarc fit`.

use betarc::diagnostics::{AccuracyReport, LjungBoxResult, Selection};
use betarc::model::{ModelSpec, ParamVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = include_str!("../schema/run_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
    /// Indices into `models`; absent when no model passes the filter.
    pub selection: Option<Selection>,
    /// Wall-clock seconds, only written with `--timing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub path: String,
    pub rows: usize,
    pub n_fit: usize,
    pub holdout: usize,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub free: bool,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub spec: ModelSpec,
    pub estimates: ParamVector,
    pub coefficients: Vec<Coefficient>,
    /// Some free coordinate has no standard error.
    pub wald_undefined: bool,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub k: usize,
    pub n: usize,
    pub converged: bool,
    /// Absent when the fitted series is too short for the requested lags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ljung_box: Option<LjungBoxResult>,
    pub accuracy_in: AccuracyReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_out: Option<AccuracyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecasts: Option<Vec<f64>>,
    /// `(u0, loglik)` for each grid point; `null` marks a failed point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_trace: Option<Vec<(f64, Option<f64>)>>,
}

impl RunReport {
    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Data(format!("invalid report: {e}")))
    }
}
