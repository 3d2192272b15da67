//! The `betarc` command line tool.

pub mod data;
pub mod error;
pub mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use betarc::diagnostics::{accuracy, forecast, ljung_box, model_select, Candidate, Horizon};
use betarc::dynamics::MapFamily;
use betarc::estimation::{default_start, fit, fit_u0_grid, FitOptions, FitResult};
use betarc::model::{
    simulate, unconditional_density_curve, DensityMethod, LinkFn, ModelSpec, ParamVector, SeriesSample,
};
use betarc::montecarlo::{run_mc, McConfig};
use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{read_covariates, read_data, DataFile};
use crate::error::{CliError, CliResult};
use crate::report::{Coefficient, DataSummary, ModelReport, RunReport};

/// Seed used when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "betarc", version, about = "Beta autoregressive chaotic time series models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit one or more models to a CSV series and write a JSON report.
    Fit(FitArgs),
    /// Run a Monte Carlo study of the precision estimator.
    Mc(McArgs),
    /// Evaluate the unconditional density of a pure chaotic model.
    Density(DensityArgs),
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// bernoulli, logistic, pwl or mp
    #[arg(long)]
    pub map: MapFamily,
    /// Map parameter (k, θ or s).
    #[arg(long)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub u0: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Autoregressive order; must match the number of --phi values.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub phi: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    #[arg(long)]
    pub link_g: Option<LinkFn>,
    #[arg(long)]
    pub link_h: Option<LinkFn>,
    /// CSV of covariate columns with at least --n rows.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the conditional means to this CSV.
    #[arg(long)]
    pub mu_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub map: MapFamily,
    /// Autoregressive orders to fit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub p: Vec<usize>,
    #[arg(long, default_value = "logit")]
    pub link_g: LinkFn,
    #[arg(long, default_value = "identity")]
    pub link_h: LinkFn,
    /// Bernoulli k (required for that map) or starting value of θ.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Hold the map parameter at --theta instead of estimating it.
    #[arg(long, requires = "theta")]
    pub fix_theta: bool,
    /// Number of u0 grid points.
    #[arg(long, conflicts_with = "u0")]
    pub u0_grid: Option<usize>,
    /// Fixed u0 instead of a grid search.
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// L-BFGS before Nelder-Mead from every start.
    #[arg(long)]
    pub two_stage: bool,
    #[arg(long, default_value_t = 20)]
    pub lb_lags: usize,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
    /// Output JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Study design as JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in design; only `table1` exists.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for summary.json and per-cell replicate CSVs.
    #[arg(long, default_value = "mc_out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub nu: f64,
    /// Orbit seed for the orbit method and the simulated sample.
    #[arg(long, default_value_t = 0.5 + std::f64::consts::PI / 100.0)]
    pub u0: f64,
    /// quadrature or orbit
    #[arg(long, default_value = "quadrature")]
    pub method: DensityMethod,
    /// Number of equally spaced points in (0, 1).
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, default_value_t = 100_000)]
    pub orbit_length: usize,
    /// Size of a simulated sample whose histogram is written to --hist-out.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("BETARC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage("BETARC_THREADS", format!("expected a positive integer, got '{raw}'")))?;
    // a second initialization in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Mc(a) => cmd_mc(&a),
        Command::Density(a) => cmd_density(&a),
    }
}

fn write_output(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn check_map(map: &MapArgs) -> CliResult<()> {
    map.map.validate_theta(map.theta).map_err(|e| CliError::usage("--theta", e))
}

fn check_unit(flag: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(flag, format!("{v} must lie in (0, 1)")))
    }
}

fn check_nu(v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage("--nu", format!("{v} must be positive")))
    }
}

/// `{:?}` prints the shortest representation that parses back exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    check_map(&a.map)?;
    check_nu(a.nu)?;
    check_unit("--u0", a.u0)?;
    if a.n == 0 {
        return Err(CliError::usage("--n", "must be positive"));
    }
    if let Some(p) = a.p {
        if p != a.phi.len() {
            return Err(CliError::usage("--p", format!("order {p} but {} --phi values", a.phi.len())));
        }
    }
    let (names, x) = match &a.covariates {
        Some(path) => {
            let (names, rows) = read_covariates(path)?;
            if rows.len() < a.n {
                return Err(CliError::usage(
                    "--covariates",
                    format!("{} rows for {} observations", rows.len(), a.n),
                ));
            }
            (names, Some(rows[..a.n].to_vec()))
        }
        None => (Vec::new(), None),
    };
    if a.beta.len() != names.len() {
        return Err(CliError::usage(
            "--beta",
            format!("{} values for {} covariate columns", a.beta.len(), names.len()),
        ));
    }
    let pure = a.alpha.is_none() && a.phi.is_empty() && x.is_none() && a.link_g.is_none() && a.link_h.is_none();
    let spec = if pure {
        ModelSpec::pure_chaotic(a.map.map)
    } else {
        ModelSpec::barc(
            a.map.map,
            a.phi.len(),
            names.len(),
            a.link_g.unwrap_or_default(),
            a.link_h.unwrap_or_default(),
        )
    };
    let gamma = ParamVector {
        nu: a.nu,
        alpha: a.alpha.unwrap_or(0.0),
        beta: a.beta.clone(),
        phi: a.phi.clone(),
        theta: a.map.theta,
        u0: a.u0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(DEFAULT_SEED));
    let path = simulate(&spec, &gamma, a.n, &mut rng, x).map_err(CliError::from)?;

    let mut csv = String::from("y");
    for name in &names {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for t in 0..a.n {
        csv.push_str(&fmt_f64(path.sample.y[t]));
        if let Some(rows) = &path.sample.x {
            for v in &rows[t] {
                csv.push(',');
                csv.push_str(&fmt_f64(*v));
            }
        }
        csv.push('\n');
    }
    write_output(a.out.as_deref(), &csv)?;

    if let Some(mu_path) = &a.mu_out {
        let mut mu = String::from("t,mu\n");
        for (t, m) in path.mu.iter().enumerate() {
            let _ = writeln!(mu, "{},{}", t + 1, fmt_f64(*m));
        }
        write_output(Some(mu_path), &mu)?;
    }
    Ok(())
}

fn coefficients(fit: &FitResult) -> Vec<Coefficient> {
    let names = fit.spec.coordinate_names();
    let flat = fit.gamma_hat.to_flat();
    let mut out: Vec<Coefficient> = names
        .into_iter()
        .zip(flat)
        .zip(&fit.free)
        .map(|((name, estimate), &free)| Coefficient {
            name,
            estimate,
            free,
            se: None,
            z: None,
            p_value: None,
        })
        .collect();
    if let Some(w) = &fit.wald {
        for (i, name) in w.names.iter().enumerate() {
            if let Some(c) = out.iter_mut().find(|c| &c.name == name) {
                c.se = w.se[i];
                c.z = w.se[i].map(|se| w.estimates[i] / se);
                c.p_value = w.p_values[i];
            }
        }
    }
    out
}

fn fit_one(a: &FitArgs, data: &DataFile, p: usize, fit_sample: &SeriesSample) -> CliResult<(ModelReport, Candidate)> {
    let spec = ModelSpec::barc(a.map, p, data.covariate_names.len(), a.link_g, a.link_h);
    let u0_start = a.u0.unwrap_or(0.5);
    let initial = match (a.map, a.theta) {
        (MapFamily::Bernoulli, None) => return Err(CliError::usage("--theta", "the Bernoulli map needs k")),
        (_, None) => None,
        (_, Some(theta)) => {
            a.map.validate_theta(theta).map_err(|e| CliError::usage("--theta", e))?;
            Some(default_start(&spec, fit_sample, Some(theta), u0_start)?)
        }
    };
    let free = a.fix_theta.then(|| {
        let mut mask = vec![true; spec.dim()];
        mask[spec.dim() - 1] = false;
        mask
    });
    let options = FitOptions {
        initial,
        u0: a.u0,
        free,
        two_stage: a.two_stage,
        ..FitOptions::default()
    };
    let result = match a.u0 {
        Some(_) => fit(&spec, fit_sample, &options)?,
        None => fit_u0_grid(&spec, fit_sample, &options, a.u0_grid.unwrap_or(900))?,
    };

    let accuracy_in = accuracy(&fit_sample.y, &result.fitted, Horizon::InSample)?;
    let lb = ljung_box(&result.residuals, a.lb_lags).ok();
    let (forecasts, accuracy_out) = if a.holdout > 0 {
        let n = fit_sample.len();
        let future: Option<Vec<Vec<f64>>> =
            (!data.covariate_names.is_empty()).then(|| data.covariates[n..n + a.holdout].to_vec());
        let f = forecast(&spec, &result, fit_sample, a.holdout, future.as_deref())?;
        let acc = accuracy(&data.y[n..n + a.holdout], &f, Horizon::OutOfSample)?;
        (Some(f), Some(acc))
    } else {
        (None, None)
    };

    let report = ModelReport {
        spec,
        estimates: result.gamma_hat.clone(),
        coefficients: coefficients(&result),
        wald_undefined: result.wald.as_ref().is_some_and(|w| w.undefined),
        loglik: result.loglik,
        aic: result.aic,
        bic: result.bic,
        k: result.k,
        n: result.n,
        converged: result.converged,
        ljung_box: lb,
        accuracy_in,
        accuracy_out,
        forecasts,
        u0_trace: result
            .u0_grid_trace
            .as_ref()
            .map(|t| t.iter().map(|&(u, ll)| (u, ll.is_finite().then_some(ll))).collect()),
    };
    // a candidate without a residual test cannot pass the filter
    let candidate = Candidate {
        accuracy_in,
        ljung_box: lb.unwrap_or(betarc::diagnostics::LjungBoxResult {
            statistic: f64::INFINITY,
            lags: a.lb_lags,
            dof: a.lb_lags,
            p_value: 0.0,
        }),
        fit: result,
    };
    Ok((report, candidate))
}

pub fn fit_report(a: &FitArgs) -> CliResult<RunReport> {
    let started = Instant::now();
    if let Some(u0) = a.u0 {
        check_unit("--u0", u0)?;
    }
    if a.u0_grid == Some(0) {
        return Err(CliError::usage("--u0-grid", "must be at least 1"));
    }
    if a.lb_lags == 0 {
        return Err(CliError::usage("--lb-lags", "must be at least 1"));
    }
    if a.p.is_empty() {
        return Err(CliError::usage("--p", "no autoregressive order given"));
    }
    let data = read_data(&a.data)?;
    if a.holdout >= data.len() {
        return Err(CliError::Data(format!(
            "holdout {} leaves no data to fit ({} rows)",
            a.holdout,
            data.len()
        )));
    }
    let n_fit = data.len() - a.holdout;
    let max_p = a.p.iter().copied().max().unwrap_or(0);
    if n_fit <= max_p {
        return Err(CliError::Data(format!("{n_fit} observations for autoregressive order {max_p}")));
    }
    let fit_sample = data.sample(0..n_fit)?;

    let mut models = Vec::with_capacity(a.p.len());
    let mut candidates = Vec::with_capacity(a.p.len());
    for &p in &a.p {
        let (m, c) = fit_one(a, &data, p, &fit_sample)?;
        models.push(m);
        candidates.push(c);
    }
    let selection = model_select(&candidates).ok();
    Ok(RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "fit".into(),
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        data: DataSummary {
            path: a.data.display().to_string(),
            rows: data.len(),
            n_fit,
            holdout: a.holdout,
            covariates: data.covariate_names.clone(),
        },
        models,
        selection,
        timing_seconds: a.timing.then(|| started.elapsed().as_secs_f64()),
    })
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let report = fit_report(a)?;
    write_output(a.out.as_deref(), &report.to_json()?)
}

pub fn mc_config(a: &McArgs) -> CliResult<McConfig> {
    let mut cfg = match (&a.config, a.preset.as_deref()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let mut cfg: McConfig =
                serde_json::from_str(&text).map_err(|e| CliError::usage("--config", format!("invalid design: {e}")))?;
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            cfg
        }
        (None, Some("table1")) => McConfig::table1(1000, a.seed.unwrap_or(DEFAULT_SEED)),
        (None, Some(other)) => return Err(CliError::usage("--preset", format!("unknown preset '{other}'"))),
        (None, None) => return Err(CliError::usage("--config", "either --config or --preset is required")),
    };
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    cfg.validate().map_err(|e| CliError::usage("--config", e))?;
    Ok(cfg)
}

pub fn cmd_mc(a: &McArgs) -> CliResult<()> {
    let cfg = mc_config(a)?;
    let summary = run_mc(&cfg)?;
    let dir = &a.out_dir;
    std::fs::create_dir_all(dir.join("replicates"))?;
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Numerical(e.to_string()))?;
    json.push('\n');
    write_output(Some(&dir.join("summary.json")), &json)?;

    let mut table = String::from("cell,theta,u0,n,mean,sd,mape,failures\n");
    for (i, c) in summary.cells.iter().enumerate() {
        let mut csv = String::from("replicate,nu_hat\n");
        for (r, e) in c.estimates.iter().enumerate() {
            let _ = writeln!(csv, "{r},{}", fmt_f64(*e));
        }
        write_output(Some(&dir.join("replicates").join(format!("cell_{i:02}.csv"))), &csv)?;
        let _ = writeln!(
            table,
            "{i},{},{},{},{:.4},{:.4},{:.2},{}",
            fmt_f64(c.theta),
            fmt_f64(c.u0),
            c.n,
            c.mean,
            c.sd,
            c.mape,
            c.failures
        );
    }
    write_output(Some(&dir.join("summary.csv")), &table)?;
    write_output(None, &table)
}

/// `points` equally spaced abscissae `i / (points + 1)`.
pub fn density_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

pub fn cmd_density(a: &DensityArgs) -> CliResult<()> {
    check_map(&a.map)?;
    check_nu(a.nu)?;
    check_unit("--u0", a.u0)?;
    if a.grid == 0 {
        return Err(CliError::usage("--grid", "must be at least 1"));
    }
    if a.orbit_length == 0 {
        return Err(CliError::usage("--orbit-length", "must be positive"));
    }
    let spec = ModelSpec::pure_chaotic(a.map.map);
    let gamma = ParamVector::pure(a.nu, a.map.theta, a.u0);
    let ys = density_grid(a.grid);
    let f = unconditional_density_curve(&spec, &gamma, &ys, a.method, a.orbit_length)
        .map_err(|e| match e {
            betarc::error::Error::DensityUnavailable(_) => CliError::usage("--method", e),
            other => other.into(),
        })?;
    let mut csv = String::from("y,density\n");
    for (y, d) in ys.iter().zip(&f) {
        let _ = writeln!(csv, "{},{}", fmt_f64(*y), fmt_f64(*d));
    }
    write_output(a.out.as_deref(), &csv)?;

    if let Some(n) = a.sample {
        if a.bins == 0 || n < a.bins {
            return Err(CliError::usage("--bins", format!("need 1 <= bins <= sample size ({n})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(DEFAULT_SEED));
        let path = simulate(&spec, &gamma, n, &mut rng, None)?;
        let hist = betarc::dynamics::Histogram::from_values(path.sample.y.iter().copied(), a.bins);
        let mut csv = String::from("left,right,density\n");
        for (i, d) in hist.density().iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", fmt_f64(hist.edges[i]), fmt_f64(hist.edges[i + 1]), fmt_f64(*d));
        }
        let target = a.hist_out.clone().ok_or_else(|| CliError::usage("--hist-out", "required with --sample"))?;
        write_output(Some(&target), &csv)?;
    }
    Ok(())
}
