//! Parametric interval maps on `[0, 1]`, their orbits and ergodic averages.
//!
//! Every orbit produced here is clamped into `[ORBIT_EPS, 1 - ORBIT_EPS]`.
//! The mod-1 maps can land exactly on `0.0` in floating point, which the
//! model cannot use as a conditional mean; each clamp is counted on the
//! returned [`Orbit`].
//!
//! Orbits of expanding maps are reproducible for a given build, but the
//! last bits of `x^(1+s)` and similar expressions are libm dependent, so
//! orbits computed on different platforms may separate after roughly fifty
//! iterates.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower/upper margin used when clamping orbit values and conditional means.
pub const ORBIT_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(ORBIT_EPS, 1.0 - ORBIT_EPS)
}

#[inline]
fn frac(v: f64) -> f64 {
    let r = v - v.floor();
    // v - floor(v) can round up to exactly 1.0 for tiny negative v
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// The supported map families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFamily {
    /// `T_k(x) = (k x) mod 1`, integer `k >= 2`.
    Bernoulli,
    /// `T(x) = θ x (1 - x)`, `θ ∈ (0, 4]`.
    Logistic,
    /// `x / θ` on `[0, θ)`, `θ (x - θ) / (1 - θ)` on `[θ, 1]`, `θ ∈ (0, 1)`.
    PiecewiseLinear,
    /// `T_s(x) = (x + x^(1+s)) mod 1`, `s > 0`.
    MannevillePomeau,
}

impl MapFamily {
    pub const ALL: [MapFamily; 4] = [
        MapFamily::Bernoulli,
        MapFamily::Logistic,
        MapFamily::PiecewiseLinear,
        MapFamily::MannevillePomeau,
    ];

    /// Short name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            MapFamily::Bernoulli => "bernoulli",
            MapFamily::Logistic => "logistic",
            MapFamily::PiecewiseLinear => "pwl",
            MapFamily::MannevillePomeau => "mp",
        }
    }

    /// Checks that `theta` lies in the family's validity domain.
    pub fn validate_theta(self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match self {
                MapFamily::Bernoulli => theta >= 2.0 && theta.fract() == 0.0,
                MapFamily::Logistic => theta > 0.0 && theta <= 4.0,
                MapFamily::PiecewiseLinear => theta > 0.0 && theta < 1.0,
                MapFamily::MannevillePomeau => theta > 0.0,
            };
        if ok {
            Ok(())
        } else {
            let domain = match self {
                MapFamily::Bernoulli => "an integer k >= 2",
                MapFamily::Logistic => "in (0, 4]",
                MapFamily::PiecewiseLinear => "in (0, 1)",
                MapFamily::MannevillePomeau => "s > 0",
            };
            Err(Error::InvalidParameter(format!(
                "{} map parameter {theta} must be {domain}",
                self.short_name()
            )))
        }
    }

    /// Interval over which the map parameter is searched during estimation,
    /// or `None` when the parameter is discrete (Bernoulli `k`).
    ///
    /// Manneville-Pomeau is restricted to `s ∈ (0, 1)`, the range where the
    /// invariant measure is a probability measure.
    pub fn estimation_domain(self) -> Option<(f64, f64)> {
        match self {
            MapFamily::Bernoulli => None,
            MapFamily::Logistic => Some((0.0, 4.0)),
            MapFamily::PiecewiseLinear | MapFamily::MannevillePomeau => Some((0.0, 1.0)),
        }
    }
}

impl fmt::Display for MapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MapFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(MapFamily::Bernoulli),
            "logistic" => Ok(MapFamily::Logistic),
            "pwl" | "piecewise" | "piecewise_linear" => Ok(MapFamily::PiecewiseLinear),
            "mp" | "manneville_pomeau" | "manneville-pomeau" => Ok(MapFamily::MannevillePomeau),
            other => Err(Error::InvalidParameter(format!("unknown map family '{other}'"))),
        }
    }
}

/// A map family together with a valid parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    family: MapFamily,
    theta: f64,
}

impl MapSpec {
    pub fn new(family: MapFamily, theta: f64) -> Result<Self> {
        family.validate_theta(theta)?;
        Ok(MapSpec { family, theta })
    }

    pub fn bernoulli(k: u32) -> Result<Self> {
        Self::new(MapFamily::Bernoulli, f64::from(k))
    }

    pub fn logistic(theta: f64) -> Result<Self> {
        Self::new(MapFamily::Logistic, theta)
    }

    pub fn piecewise_linear(theta: f64) -> Result<Self> {
        Self::new(MapFamily::PiecewiseLinear, theta)
    }

    pub fn manneville_pomeau(s: f64) -> Result<Self> {
        Self::new(MapFamily::MannevillePomeau, s)
    }

    pub fn family(&self) -> MapFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Evaluates the map without a domain check on `x`.
    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let th = self.theta;
        match self.family {
            MapFamily::Bernoulli => frac(th * x),
            MapFamily::Logistic => th * x * (1.0 - x),
            MapFamily::PiecewiseLinear => {
                if x < th {
                    x / th
                } else {
                    th * (x - th) / (1.0 - th)
                }
            }
            MapFamily::MannevillePomeau => frac(x + x.powf(1.0 + th)),
        }
    }

    /// Applies the map to `x ∈ [0, 1]`.
    pub fn apply(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("map argument {x} outside [0, 1]")));
        }
        Ok(self.eval(x))
    }

    /// Streaming, clamped orbit starting at `u0`.
    pub fn orbit_iter(&self, u0: f64) -> OrbitIter {
        OrbitIter {
            map: *self,
            next: u0,
            clamped: 0,
            started: false,
        }
    }

    /// The first `n` points of the orbit of `u0`.
    pub fn iterate(&self, u0: f64, n: usize) -> Orbit {
        let mut it = self.orbit_iter(u0);
        let values: Vec<f64> = it.by_ref().take(n).collect();
        Orbit {
            u0,
            values,
            clamped_count: it.clamped,
        }
    }

    /// Birkhoff average `(1/n) Σ_{k<n} f(T^k(u0))` along the clamped orbit.
    pub fn birkhoff_average<F: Fn(f64) -> f64>(&self, u0: f64, n: usize, f: F) -> f64 {
        assert!(n >= 1, "birkhoff average needs at least one iterate");
        let sum: f64 = self.orbit_iter(u0).take(n).map(f).sum();
        sum / n as f64
    }

    /// Closed-form density of the absolutely continuous invariant measure,
    /// where one is implemented.
    pub fn invariant_density(&self, x: f64) -> Option<f64> {
        match self.family {
            MapFamily::Bernoulli => Some(1.0),
            MapFamily::Logistic if self.theta == 4.0 => Some(1.0 / (PI * (x * (1.0 - x)).sqrt())),
            _ => None,
        }
    }

    pub fn has_invariant_density(&self) -> bool {
        self.invariant_density(0.5).is_some()
    }

    /// Normalized histogram of the first `n` orbit points over `bins` equal
    /// bins of `[0, 1]`.
    pub fn empirical_density(&self, u0: f64, n: usize, bins: usize) -> Result<Histogram> {
        if bins == 0 || n < bins {
            return Err(Error::InvalidParameter(format!(
                "empirical density needs n >= bins >= 1 (n = {n}, bins = {bins})"
            )));
        }
        Ok(Histogram::from_values(self.orbit_iter(u0).take(n), bins))
    }
}

impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.theta)
    }
}

/// Iterator over `u0, T(u0), T²(u0), ...`, each value clamped into
/// `[ORBIT_EPS, 1 - ORBIT_EPS]`.
#[derive(Debug, Clone)]
pub struct OrbitIter {
    map: MapSpec,
    next: f64,
    clamped: usize,
    started: bool,
}

impl OrbitIter {
    /// Number of values clamped so far.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }
}

impl Iterator for OrbitIter {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        let raw = if self.started {
            self.map.eval(self.next)
        } else {
            self.started = true;
            self.next
        };
        let v = clamp_unit(raw);
        if v != raw {
            self.clamped += 1;
        }
        self.next = v;
        Some(v)
    }
}

/// A finite orbit `values[t] = T^t(u0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub u0: f64,
    pub values: Vec<f64>,
    pub clamped_count: usize,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Histogram over `[0, 1]` with bin masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    /// Bins values in `[0, 1]` into `bins` equal-width bins. Values outside
    /// the interval are assigned to the nearest end bin.
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I, bins: usize) -> Self {
        assert!(bins >= 1);
        let mut counts = vec![0usize; bins];
        let mut total = 0usize;
        for v in values {
            let idx = ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
            counts[idx] += 1;
            total += 1;
        }
        let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let masses = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        Histogram { edges, masses }
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    /// Bin heights on the density scale (mass / width).
    pub fn density(&self) -> Vec<f64> {
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m / (e[1] - e[0]))
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}
