#![allow(dead_code)]

/// Straight-line evaluation of the recursion, one scalar at a time.
pub mod oracle {
    use betarc::dynamics::MapFamily;
    use betarc::model::{LinkFn, ModelSpec, ParamVector};

    const EPS: f64 = 1e-12;

    fn wrap(v: f64) -> f64 {
        let r = v - v.floor();
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    }

    pub fn step(family: MapFamily, theta: f64, x: f64) -> f64 {
        match family {
            MapFamily::Bernoulli => wrap(theta * x),
            MapFamily::Logistic => theta * x * (1.0 - x),
            MapFamily::PiecewiseLinear => {
                if x < theta {
                    x / theta
                } else {
                    theta * (x - theta) / (1.0 - theta)
                }
            }
            MapFamily::MannevillePomeau => wrap(x + x.powf(1.0 + theta)),
        }
    }

    pub fn link(l: LinkFn, x: f64) -> f64 {
        match l {
            LinkFn::Identity => x,
            LinkFn::Logit => (x / (1.0 - x)).ln(),
            LinkFn::Cloglog => (-(-x).ln_1p()).ln(),
        }
    }

    pub fn inverse(l: LinkFn, e: f64) -> f64 {
        match l {
            LinkFn::Identity => e,
            LinkFn::Logit => 1.0 / (1.0 + (-e).exp()),
            LinkFn::Cloglog => -(-(e.exp())).exp_m1(),
        }
    }

    pub fn means(spec: &ModelSpec, g: &ParamVector, y: &[f64], x: Option<&[Vec<f64>]>) -> Vec<f64> {
        let n = y.len();
        let mut out = Vec::new();
        let mut z = g.u0.clamp(EPS, 1.0 - EPS);
        for t in 0..n {
            let mut eta = g.alpha;
            if let Some(x) = x {
                for i in 0..spec.l {
                    eta += x[t][i] * g.beta[i];
                }
            }
            for j in 1..=spec.p {
                if t >= j {
                    let mut xb = 0.0;
                    if let Some(x) = x {
                        for i in 0..spec.l {
                            xb += x[t - j][i] * g.beta[i];
                        }
                    }
                    eta += g.phi[j - 1] * (link(spec.g, y[t - j]) - xb);
                }
            }
            eta += link(spec.h, z);
            out.push(inverse(spec.g, eta).clamp(EPS, 1.0 - EPS));
            z = step(spec.map, g.theta, z).clamp(EPS, 1.0 - EPS);
        }
        out
    }

    /// Stirling series after shifting the argument above 15.
    pub fn ln_gamma(x: f64) -> f64 {
        let mut shift = 0.0;
        let mut z = x;
        while z < 15.0 {
            shift += z.ln();
            z += 1.0;
        }
        let z2 = z * z;
        let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
            - 1.0 / (1680.0 * z * z2 * z2 * z2)
            + 1.0 / (1188.0 * z * z2 * z2 * z2 * z2);
        (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
    }

    pub fn log_beta_density(mu: f64, nu: f64, y: f64) -> f64 {
        let (a, b) = (mu * nu, (1.0 - mu) * nu);
        ln_gamma(nu) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * y.ln() + (b - 1.0) * (1.0 - y).ln()
    }

    pub fn loglik(spec: &ModelSpec, g: &ParamVector, y: &[f64], x: Option<&[Vec<f64>]>) -> f64 {
        means(spec, g, y, x).iter().zip(y).map(|(m, v)| log_beta_density(*m, g.nu, *v)).sum()
    }
}
