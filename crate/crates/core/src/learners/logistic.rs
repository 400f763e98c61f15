//! L2-regularized logistic regression fit by damped Newton iterations.
//! Objective: `sum_i [softplus(z_i) - y_i z_i] + l2/2 |w|^2`, intercept unpenalized.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::numeric::{dot, sigmoid, softplus, Scalar};

const GRAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<F> {
    pub weights: Vec<F>,
    pub intercept: F,
}

#[derive(Debug, Clone)]
pub struct LogisticFit<F> {
    pub model: LogisticModel<F>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: F,
}

impl<F: Scalar> LogisticModel<F> {
    pub fn logit(&self, x: &[F]) -> F {
        dot(&self.weights, x) + self.intercept
    }

    pub fn probability(&self, x: &[F]) -> F {
        sigmoid(self.logit(x))
    }

    pub fn objective(&self, x: &Matrix<F>, y: &[bool], l2: F) -> F {
        let data: F = x
            .iter_rows()
            .zip(y)
            .map(|(r, &t)| {
                let z = self.logit(r);
                softplus(z) - if t { z } else { F::zero() }
            })
            .sum();
        data + l2 / F::lit(2.0) * dot(&self.weights, &self.weights)
    }

    /// Gradient with respect to `(weights..., intercept)`.
    pub fn gradient(&self, x: &Matrix<F>, y: &[bool], l2: F) -> Vec<F> {
        let p = self.weights.len();
        let mut g = vec![F::zero(); p + 1];
        for (r, &t) in x.iter_rows().zip(y) {
            let e = self.probability(r) - if t { F::one() } else { F::zero() };
            for j in 0..p {
                g[j] += e * r[j];
            }
            g[p] += e;
        }
        for j in 0..p {
            g[j] += l2 * self.weights[j];
        }
        g
    }
}

pub fn logreg_fit<F: Scalar>(x: &Matrix<F>, y: &[bool], l2: F, max_iter: usize) -> Result<LogisticFit<F>> {
    let n = x.rows();
    let p = x.cols();
    if n == 0 {
        return Err(Error::Fit("logistic regression on empty input".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    let n_pos = y.iter().filter(|&&t| t).count();
    let rate = F::from_count(n_pos) / F::from_count(n);
    let eps = F::lit(1e-6);
    let clamped = rate.max(eps).min(F::one() - eps);
    let mut model = LogisticModel {
        weights: vec![F::zero(); p],
        intercept: (clamped / (F::one() - clamped)).ln(),
    };
    if n_pos == 0 || n_pos == n {
        return Ok(LogisticFit {
            model,
            iterations: 0,
            converged: true,
            grad_norm: F::zero(),
        });
    }

    let dim = p + 1;
    let mut fval = model.objective(x, y, l2);
    let mut iterations = 0;
    let mut grad_norm = F::infinity();
    while iterations < max_iter {
        let g = model.gradient(x, y, l2);
        grad_norm = g.iter().map(|&v| v * v).sum::<F>().sqrt();
        if grad_norm <= F::lit(GRAD_TOL) {
            break;
        }
        iterations += 1;
        let mut h = vec![F::zero(); dim * dim];
        for r in x.iter_rows() {
            let pr = model.probability(r);
            let w = pr * (F::one() - pr);
            for j in 0..dim {
                let xj = if j < p { r[j] } else { F::one() };
                for k in j..dim {
                    let xk = if k < p { r[k] } else { F::one() };
                    h[j * dim + k] += w * xj * xk;
                }
            }
        }
        for j in 0..dim {
            for k in 0..j {
                h[j * dim + k] = h[k * dim + j];
            }
        }
        for j in 0..p {
            h[j * dim + j] += l2;
        }
        let mut damping = F::lit(1e-10);
        let step = loop {
            let mut hd = h.clone();
            for j in 0..dim {
                hd[j * dim + j] += damping;
            }
            if let Some(s) = cholesky_solve(&hd, &g, dim, F::zero()) {
                break s;
            }
            damping *= F::lit(100.0);
            if damping > F::lit(1e6) {
                return Err(Error::Fit("logistic Hessian is not positive definite".into()));
            }
        };

        let mut t = F::one();
        let mut improved = false;
        while t > F::lit(1e-12) {
            let cand = LogisticModel {
                weights: model.weights.iter().zip(&step).map(|(&w, &s)| w - t * s).collect(),
                intercept: model.intercept - t * step[p],
            };
            let f = cand.objective(x, y, l2);
            if f <= fval {
                model = cand;
                fval = f;
                improved = true;
                break;
            }
            t /= F::lit(2.0);
        }
        if !improved {
            break;
        }
    }
    let g = model.gradient(x, y, l2);
    grad_norm = grad_norm.min(g.iter().map(|&v| v * v).sum::<F>().sqrt());
    Ok(LogisticFit {
        converged: grad_norm <= F::lit(GRAD_TOL),
        model,
        iterations,
        grad_norm,
    })
}
