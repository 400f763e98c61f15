//! Ordinary least squares via normal equations on centred, scaled predictors.
//! A rank-deficient system falls back to ridge with lambda = 1e-8 on the
//! correlation scale.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::numeric::Scalar;

const RIDGE: f64 = 1e-8;
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<F> {
    pub coefficients: Vec<F>,
    pub intercept: F,
    /// Whether the ridge fallback was needed.
    pub ridge: bool,
}

impl<F: Scalar> LinearModel<F> {
    pub fn predict(&self, row: &[F]) -> F {
        row.iter()
            .zip(&self.coefficients)
            .fold(self.intercept, |acc, (&x, &c)| acc + x * c)
    }

    pub fn residuals(&self, x: &Matrix<F>, y: &[F]) -> Vec<F> {
        x.iter_rows().zip(y).map(|(r, &v)| v - self.predict(r)).collect()
    }
}

fn normal_system<F: Scalar>(z: &[Vec<F>], rhs: &[F], p: usize) -> (Vec<F>, Vec<F>) {
    let mut gram = vec![F::zero(); p * p];
    let mut b = vec![F::zero(); p];
    for j in 0..p {
        for k in j..p {
            let v = z[j].iter().zip(&z[k]).map(|(&a, &c)| a * c).sum::<F>();
            gram[j * p + k] = v;
            gram[k * p + j] = v;
        }
        b[j] = z[j].iter().zip(rhs).map(|(&a, &c)| a * c).sum();
    }
    (gram, b)
}

pub fn ols_fit<F: Scalar>(x: &Matrix<F>, y: &[F]) -> Result<LinearModel<F>> {
    let n = x.rows();
    let p = x.cols();
    if n == 0 {
        return Err(Error::Fit("OLS on empty input".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    let nf = F::from_count(n);
    let y_mean = y.iter().copied().sum::<F>() / nf;
    let yc: Vec<F> = y.iter().map(|&v| v - y_mean).collect();

    // column-major centred and scaled predictors
    let mut means = vec![F::zero(); p];
    let mut scales = vec![F::one(); p];
    let mut z: Vec<Vec<F>> = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j);
        let m = col.iter().copied().sum::<F>() / nf;
        let ss = col.iter().map(|&v| (v - m) * (v - m)).sum::<F>();
        let s = (ss / nf).sqrt();
        let s = if s > F::zero() { s } else { F::one() };
        means[j] = m;
        scales[j] = s;
        z.push(col.into_iter().map(|v| (v - m) / s).collect());
    }

    let (mut gram, b) = normal_system(&z, &yc, p);
    let mut ridge = false;
    let mut beta = if p == 0 {
        Vec::new()
    } else {
        match cholesky_solve(&gram, &b, p, F::lit(SINGULAR_TOL)) {
            Some(beta) => beta,
            None => {
                ridge = true;
                let lambda = F::lit(RIDGE) * nf;
                for j in 0..p {
                    gram[j * p + j] += lambda;
                }
                cholesky_solve(&gram, &b, p, F::zero())
                    .ok_or_else(|| Error::Fit("normal equations singular even with ridge".into()))?
            }
        }
    };

    // one step of iterative refinement
    if p > 0 {
        let fitted: Vec<F> = (0..n)
            .map(|i| (0..p).map(|j| z[j][i] * beta[j]).sum::<F>())
            .collect();
        let resid: Vec<F> = yc.iter().zip(&fitted).map(|(&a, &f)| a - f).collect();
        let mut r = vec![F::zero(); p];
        for j in 0..p {
            r[j] = z[j].iter().zip(&resid).map(|(&a, &c)| a * c).sum();
            if ridge {
                r[j] -= F::lit(RIDGE) * nf * beta[j];
            }
        }
        if let Some(delta) = cholesky_solve(&gram, &r, p, F::zero()) {
            beta.iter_mut().zip(delta).for_each(|(bj, dj)| *bj += dj);
        }
    }

    let coefficients: Vec<F> = beta.iter().zip(&scales).map(|(&bj, &s)| bj / s).collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(&c, &m)| c * m)
            .sum::<F>();
    Ok(LinearModel {
        coefficients,
        intercept,
        ridge,
    })
}
