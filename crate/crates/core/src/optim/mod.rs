//! Derivative-free and quasi-Newton minimizers used by the estimator.
//!
//! Box constraints are handled by optimizing over unconstrained internal
//! coordinates `z`, mapped onto `[lower, upper]` by
//! `x = lower + (upper - lower) sin²(z)`.

mod lbfgs;
mod nelder_mead;

pub use lbfgs::{Lbfgs, LbfgsResult};
pub use nelder_mead::{NelderMead, NelderMeadResult};

/// Smooth bijection between internal coordinates and a box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTransform {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxTransform {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l < u),
            "lower bounds must be strictly below upper bounds"
        );
        BoxTransform { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Internal coordinates of a point of the box. Points outside the box
    /// are projected onto it first.
    pub fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| {
                let r = ((v - l) / (u - l)).clamp(0.0, 1.0);
                r.sqrt().asin()
            })
            .collect()
    }

    pub fn to_external(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        self.to_external_into(z, &mut out);
        out
    }

    pub fn to_external_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let s = z[i].sin();
            let (l, u) = (self.lower[i], self.upper[i]);
            *o = (l + (u - l) * s * s).clamp(l, u);
        }
    }
}
