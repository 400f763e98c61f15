//! Soft-margin SVM trained by sequential minimal optimization over the dual.
//!
//! Working-set selection takes the maximal KKT-violating pair; training stops
//! once `max_{I_up} -y_t G_t - min_{I_low} -y_t G_t <= tol`, which bounds every
//! sample's KKT violation (in units of `y f(x) - 1`) by `tol`.

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numeric::Scalar;

use super::KernelSpec;

pub const DEFAULT_TOL: f64 = 1e-3;

/// Samples up to which the full Gram matrix is cached.
const GRAM_CACHE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams<F> {
    pub c: F,
    pub kernel: KernelSpec,
    pub tol: F,
    pub max_iter: usize,
}

impl<F: Scalar> SvmParams<F> {
    pub fn new(c: F, kernel: KernelSpec) -> Self {
        Self {
            c,
            kernel,
            tol: F::lit(DEFAULT_TOL),
            max_iter: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<F> {
    support_vectors: Matrix<F>,
    /// `alpha_i * y_i` per support vector.
    dual_coef: Vec<F>,
    bias: F,
    kernel: KernelSpec,
    c: F,
}

/// Full solver output, including the multipliers of every training sample.
#[derive(Debug, Clone)]
pub struct SvmSolution<F> {
    pub model: SvmModel<F>,
    pub alpha: Vec<F>,
    pub iterations: usize,
    pub converged: bool,
}

impl<F: Scalar> SvmModel<F> {
    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    pub fn bias(&self) -> F {
        self.bias
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn c(&self) -> F {
        self.c
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }

    pub fn support_vectors(&self) -> &Matrix<F> {
        &self.support_vectors
    }

    pub fn dual_coef(&self) -> &[F] {
        &self.dual_coef
    }

    /// `sum_i alpha_i y_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[F]) -> Result<F> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[F]) -> F {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .fold(self.bias, |acc, (sv, &c)| acc + c * self.kernel.eval(sv, x))
    }

    /// Explicit weight vector `w = sum_i alpha_i y_i x_i`; only for the linear kernel.
    pub fn primal_weights(&self) -> Option<Vec<F>> {
        if !self.kernel.is_linear() {
            return None;
        }
        let mut w = vec![F::zero(); self.dim()];
        for (sv, &c) in self.support_vectors.iter_rows().zip(&self.dual_coef) {
            for (wj, &xj) in w.iter_mut().zip(sv) {
                *wj += c * xj;
            }
        }
        Some(w)
    }
}

enum KernelRows<'a, F> {
    Cached(Vec<F>),
    OnTheFly(&'a Matrix<F>, KernelSpec),
}

impl<F: Scalar> KernelRows<'_, F> {
    fn row(&self, i: usize, n: usize, buf: &mut Vec<F>) {
        match self {
            KernelRows::Cached(g) => {
                buf.clear();
                buf.extend_from_slice(&g[i * n..(i + 1) * n]);
            }
            KernelRows::OnTheFly(x, k) => {
                buf.clear();
                let xi = x.row(i);
                buf.extend(x.iter_rows().map(|xt| k.eval(xi, xt)));
            }
        }
    }
}

pub fn svm_train<F: Scalar>(x: &Matrix<F>, y: &[bool], params: &SvmParams<F>) -> Result<SvmModel<F>> {
    svm_train_detailed(x, y, params).map(|s| s.model)
}

/// Trains on labels `y` (true = +1). Requires at least one sample of each label.
pub fn svm_train_detailed<F: Scalar>(
    x: &Matrix<F>,
    y: &[bool],
    params: &SvmParams<F>,
) -> Result<SvmSolution<F>> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if !(params.c > F::zero()) {
        return Err(Error::Training(format!("C must be positive, got {}", params.c)));
    }
    if !y.iter().any(|&v| v) || y.iter().all(|&v| v) {
        return Err(Error::Training("SVM training needs samples of both labels".into()));
    }
    let c = params.c;
    let tol = params.tol;
    let ys: Vec<F> = y.iter().map(|&v| if v { F::one() } else { -F::one() }).collect();

    let rows = if n <= GRAM_CACHE_LIMIT {
        let mut g = vec![F::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = params.kernel.eval(x.row(i), x.row(j));
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        KernelRows::Cached(g)
    } else {
        KernelRows::OnTheFly(x, params.kernel)
    };
    let diag: Vec<F> = (0..n).map(|i| params.kernel.eval(x.row(i), x.row(i))).collect();

    let mut alpha = vec![F::zero(); n];
    let mut grad = vec![-F::one(); n];
    let tau = F::lit(1e-12);
    let mut ki = Vec::with_capacity(n);
    let mut kj = Vec::with_capacity(n);

    let in_up = |a: F, yt: F| (yt > F::zero() && a < c) || (yt < F::zero() && a > F::zero());
    let in_low = |a: F, yt: F| (yt > F::zero() && a > F::zero()) || (yt < F::zero() && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let (mut m_up, mut m_low);
    loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        m_up = F::neg_infinity();
        m_low = F::infinity();
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if in_up(alpha[t], ys[t]) && v > m_up {
                m_up = v;
                i = t;
            }
            if in_low(alpha[t], ys[t]) && v < m_low {
                m_low = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || m_up - m_low <= tol {
            converged = true;
            break;
        }
        if iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        rows.row(i, n, &mut ki);
        rows.row(j, n, &mut kj);
        let curvature = (diag[i] + diag[j] - F::lit(2.0) * ki[j]).max(tau);
        let mut step = (m_up - m_low) / curvature;
        // box constraints for alpha_i + y_i*step and alpha_j - y_j*step
        step = step.min(if ys[i] > F::zero() { c - alpha[i] } else { alpha[i] });
        step = step.min(if ys[j] > F::zero() { alpha[j] } else { c - alpha[j] });

        alpha[i] = (alpha[i] + ys[i] * step).max(F::zero()).min(c);
        alpha[j] = (alpha[j] - ys[j] * step).max(F::zero()).min(c);
        for t in 0..n {
            grad[t] += ys[t] * step * (ki[t] - kj[t]);
        }
    }
    if !converged {
        warn!("SMO stopped after {iterations} iterations without reaching tol {tol}");
    }

    // bias: mean of -y G over free vectors, else the midpoint of the feasible interval
    let mut free_sum = F::zero();
    let mut free_n = 0usize;
    for t in 0..n {
        if alpha[t] > F::zero() && alpha[t] < c {
            free_sum += -ys[t] * grad[t];
            free_n += 1;
        }
    }
    let bias = if free_n > 0 {
        free_sum / F::from_count(free_n)
    } else if m_up.is_finite() && m_low.is_finite() {
        (m_up + m_low) / F::lit(2.0)
    } else if m_up.is_finite() {
        m_up
    } else {
        m_low
    };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > F::zero()).collect();
    let model = SvmModel {
        support_vectors: x.select_rows(&sv),
        dual_coef: sv.iter().map(|&t| alpha[t] * ys[t]).collect(),
        bias,
        kernel: params.kernel,
        c,
    };
    Ok(SvmSolution {
        model,
        alpha,
        iterations,
        converged,
    })
}
