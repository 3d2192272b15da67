use std::collections::VecDeque;

/// Limited-memory BFGS with central-difference gradients and a backtracking
/// Armijo line search.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    pub memory: usize,
    pub max_iter: usize,
    /// Relative reduction threshold, in units of machine epsilon.
    pub factr: f64,
    /// Sup-norm gradient tolerance.
    pub pgtol: f64,
}

impl Default for Lbfgs {
    fn default() -> Self {
        Lbfgs {
            memory: 5,
            max_iter: 200,
            factr: 1e7,
            pgtol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    /// Minimizes `f` from `x0`; non-finite values count as `+∞`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> LbfgsResult {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };

        let mut x = x0.to_vec();
        let mut fx = eval(&x, &mut evals);
        if n == 0 || !fx.is_finite() {
            return LbfgsResult {
                x,
                fx,
                iterations: 0,
                evaluations: evals,
                converged: false,
            };
        }

        let gradient = |x: &[f64], eval: &mut dyn FnMut(&[f64]) -> f64| -> Option<Vec<f64>> {
            let mut g = vec![0.0; n];
            let mut probe = x.to_vec();
            for i in 0..n {
                let h = 6e-6 * x[i].abs().max(1.0);
                probe[i] = x[i] + h;
                let fp = eval(&probe);
                probe[i] = x[i] - h;
                let fm = eval(&probe);
                probe[i] = x[i];
                if !(fp.is_finite() && fm.is_finite()) {
                    return None;
                }
                g[i] = (fp - fm) / (2.0 * h);
            }
            Some(g)
        };

        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut g = match gradient(&x, &mut |p| eval(p, &mut evals)) {
            Some(g) => g,
            None => {
                return LbfgsResult {
                    x,
                    fx,
                    iterations: 0,
                    evaluations: evals,
                    converged: false,
                }
            }
        };
        let mut converged = false;
        let mut iterations = 0;

        while iterations < self.max_iter {
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= self.pgtol {
                converged = true;
                break;
            }
            iterations += 1;

            // two-loop recursion
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let a = rho * dot(s, &q);
                q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = history.back() {
                let scale = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|qi| *qi *= scale);
            } else {
                let gn = dot(&g, &g).sqrt();
                q.iter_mut().for_each(|qi| *qi /= gn.max(1.0));
            }
            for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
            }
            let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
            let mut slope = dot(&g, &dir);
            if slope >= 0.0 {
                history.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
                let ft = eval(&trial, &mut evals);
                if ft <= fx + 1e-4 * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                step *= 0.5;
            }
            let Some((x_new, f_new)) = accepted else {
                break;
            };
            let Some(g_new) = gradient(&x_new, &mut |p| eval(p, &mut evals)) else {
                x = x_new;
                fx = f_new;
                break;
            };

            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if history.len() == self.memory {
                    history.pop_front();
                }
                history.push_back((s, y, 1.0 / sy));
            }

            let rel = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
            x = x_new;
            fx = f_new;
            g = g_new;
            if rel <= self.factr * f64::EPSILON {
                converged = true;
                break;
            }
        }

        LbfgsResult {
            x,
            fx,
            iterations,
            evaluations: evals,
            converged,
        }
    }
}
