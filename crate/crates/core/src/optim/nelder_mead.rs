/// Nelder-Mead simplex minimizer with the standard coefficients.
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_iter: usize,
    /// Stop when `max f - min f` over the simplex falls below this.
    pub ftol: f64,
    /// Stop when the simplex diameter (sup norm) falls below this.
    pub xtol: f64,
    /// Keep the best value after each iteration.
    pub record_trace: bool,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iter: 5000,
            ftol: 1e-8,
            xtol: 1e-10,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Value spread across the final simplex.
    pub spread: f64,
    pub trace: Vec<f64>,
}

impl NelderMead {
    /// Minimizes `f` from `x0`. Non-finite values are treated as `+∞`.
    ///
    /// The initial simplex perturbs each coordinate by 5% of its value, or
    /// by 0.00025 when it is zero.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> NelderMeadResult {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        if n == 0 {
            let fx = eval(x0, &mut evals);
            return NelderMeadResult {
                x: Vec::new(),
                fx,
                iterations: 0,
                evaluations: evals,
                converged: true,
                spread: 0.0,
                trace: Vec::new(),
            };
        }

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] = if v[i] != 0.0 { 1.05 * v[i] } else { 0.00025 };
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut centroid = vec![0.0; n];
        let mut converged = false;

        loop {
            // order vertices by value; stable so ties keep insertion order
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            if self.record_trace {
                trace.push(values[0]);
            }

            let spread = values[n] - values[0];
            let diameter = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (spread.is_finite() && spread <= self.ftol) || diameter <= self.xtol {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(self.reflection);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = along(self.reflection * self.expansion);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            if fr < values[n] {
                let xc = along(self.reflection * self.contraction);
                let fc = eval(&xc, &mut evals);
                if fc <= fr {
                    simplex[n] = xc;
                    values[n] = fc;
                    continue;
                }
            } else {
                let xcc = along(-self.contraction);
                let fcc = eval(&xcc, &mut evals);
                if fcc < values[n] {
                    simplex[n] = xcc;
                    values[n] = fcc;
                    continue;
                }
            }
            // shrink towards the best vertex
            let best = simplex[0].clone();
            for i in 1..=n {
                for (x, b) in simplex[i].iter_mut().zip(&best) {
                    *x = b + self.shrink * (*x - b);
                }
                values[i] = eval(&simplex[i], &mut evals);
            }
        }

        let spread = values[n] - values[0];
        NelderMeadResult {
            x: simplex.swap_remove(0),
            fx: values[0],
            iterations,
            evaluations: evals,
            converged,
            spread,
            trace,
        }
    }
}
