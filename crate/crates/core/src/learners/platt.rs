//! Platt scaling: `p(d) = 1 / (1 + exp(A d + B))`, fit by Newton's method with
//! backtracking on the NLL against smoothed targets `(N+ + 1)/(N+ + 2)` and
//! `1/(N- + 2)`.

use crate::error::{Error, Result};
use crate::numeric::{softplus, Scalar};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const MIN_STEP: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattScaler<F> {
    pub a: F,
    pub b: F,
}

impl<F: Scalar> PlattScaler<F> {
    /// Calibrated probability of the positive label, clamped into the open unit interval.
    pub fn probability(&self, decision: F) -> F {
        let z = self.a * decision + self.b;
        let p = if z >= F::zero() {
            let e = (-z).exp();
            e / (F::one() + e)
        } else {
            F::one() / (F::one() + z.exp())
        };
        p.max(F::epsilon()).min(F::one() - F::epsilon())
    }
}

fn targets<F: Scalar>(labels: &[bool]) -> (usize, usize, F, F) {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    let hi = (F::from_count(n_pos) + F::one()) / (F::from_count(n_pos) + F::lit(2.0));
    let lo = F::one() / (F::from_count(n_neg) + F::lit(2.0));
    (n_pos, n_neg, hi, lo)
}

/// Negative log-likelihood of `(a, b)` against the smoothed targets.
pub(crate) fn platt_nll<F: Scalar>(decisions: &[F], labels: &[bool], a: F, b: F) -> F {
    let (_, _, hi, lo) = targets::<F>(labels);
    decisions
        .iter()
        .zip(labels)
        .map(|(&d, &l)| {
            let t = if l { hi } else { lo };
            let z = a * d + b;
            // -[t ln p + (1-t) ln(1-p)] with p = sigma(-z)
            t * z + softplus(-z)
        })
        .sum()
}

pub fn platt_fit<F: Scalar>(decisions: &[F], labels: &[bool]) -> Result<PlattScaler<F>> {
    if decisions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: decisions.len(),
            got: labels.len(),
        });
    }
    let (n_pos, n_neg, hi, lo) = targets::<F>(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Fit("Platt scaling needs both labels".into()));
    }
    let prior_b = ((F::from_count(n_neg) + F::one()) / (F::from_count(n_pos) + F::one())).ln();
    let first = decisions[0];
    if decisions.iter().all(|&d| d == first) {
        // smoothed base rate
        return Ok(PlattScaler { a: F::zero(), b: prior_b });
    }

    let mut a = F::zero();
    let mut b = prior_b;
    let mut fval = platt_nll(decisions, labels, a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22) = (F::lit(HESSIAN_RIDGE), F::lit(HESSIAN_RIDGE));
        let (mut h21, mut g1, mut g2) = (F::zero(), F::zero(), F::zero());
        for (&d, &l) in decisions.iter().zip(labels) {
            let t = if l { hi } else { lo };
            let z = a * d + b;
            // p = 1/(1+exp(z)), q = 1 - p
            let (p, q) = if z >= F::zero() {
                let e = (-z).exp();
                (e / (F::one() + e), F::one() / (F::one() + e))
            } else {
                let e = z.exp();
                (F::one() / (F::one() + e), e / (F::one() + e))
            };
            let w = p * q;
            h11 += d * d * w;
            h22 += w;
            h21 += d * w;
            let r = t - p;
            g1 += d * r;
            g2 += r;
        }
        if (g1 * g1 + g2 * g2).sqrt() <= F::lit(GRAD_TOL) {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let slope = g1 * da + g2 * db;

        let mut step = F::one();
        let mut accepted = false;
        while step >= F::lit(MIN_STEP) {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(decisions, labels, na, nb);
            if nf < fval + F::lit(1e-4) * step * slope {
                a = na;
                b = nb;
                fval = nf;
                accepted = true;
                break;
            }
            step /= F::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    Ok(PlattScaler { a, b })
}
