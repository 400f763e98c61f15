//! Kernel SHAP attributions for an auxiliary model that predicts a sensitive
//! attribute, and detection of features that dominate that prediction.

use log::warn;
use rand::seq::{index::sample, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, SensitiveSpec};
use crate::error::{Error, Result};
use crate::learners::{logreg_fit, Standardizer};
use crate::linalg::{cholesky_solve, Matrix};
use crate::numeric::Scalar;
use crate::rng::{derive_seed, derived_rng, rng_from, Rng};

/// Largest dimension for which all coalitions are enumerated.
pub const EXACT_MAX_DIM: usize = 12;

/// How coalitions are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coalitions {
    /// Exact Shapley values from all `2^d` coalitions; requires `d <= 12`.
    Exact,
    /// Kernel-weighted least squares over this many coalitions. When the
    /// budget covers every proper coalition, all of them are used with their
    /// exact kernel weights.
    Sampled(usize),
}

/// Attributions of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution<F> {
    pub values: Vec<F>,
    /// Mean model output over the background.
    pub base: F,
    pub prediction: F,
}

/// `v(S)`: model output with features outside `mask` replaced by background rows, averaged.
fn coalition_value<F: Scalar>(f: &(impl Fn(&[F]) -> F + ?Sized), x: &[F], background: &Matrix<F>, mask: &[bool]) -> F {
    let mut buf = vec![F::zero(); x.len()];
    let mut total = F::zero();
    for b in background.iter_rows() {
        for j in 0..x.len() {
            buf[j] = if mask[j] { x[j] } else { b[j] };
        }
        total += f(&buf);
    }
    total / F::from_count(background.rows())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn mask_of(bits: usize, d: usize) -> Vec<bool> {
    (0..d).map(|j| bits >> j & 1 == 1).collect()
}

fn exact_shapley<F: Scalar>(f: &(impl Fn(&[F]) -> F + ?Sized), x: &[F], background: &Matrix<F>) -> Vec<F> {
    let d = x.len();
    let values: Vec<F> = (0..1usize << d).map(|bits| coalition_value(f, x, background, &mask_of(bits, d))).collect();
    // weight of a coalition of size s not containing j: s! (d-s-1)! / d!
    let weight: Vec<F> = (0..d).map(|s| F::lit(1.0 / (d as f64 * binomial(d - 1, s)))).collect();
    let mut phi = vec![F::zero(); d];
    for bits in 0..1usize << d {
        let s = bits.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if bits >> j & 1 == 0 {
                *p += weight[s] * (values[bits | 1 << j] - values[bits]);
            }
        }
    }
    phi
}

/// Constrained weighted least squares: `sum(phi) = delta` is enforced exactly
/// by eliminating the last coordinate.
fn solve_kernel_wls<F: Scalar>(masks: &[Vec<bool>], weights: &[F], values: &[F], base: F, delta: F) -> Option<Vec<F>> {
    let d = masks[0].len();
    let p = d - 1;
    let mut gram = vec![F::zero(); p * p];
    let mut rhs = vec![F::zero(); p];
    let mut z = vec![F::zero(); p];
    for ((mask, &w), &v) in masks.iter().zip(weights).zip(values) {
        let last = if mask[d - 1] { F::one() } else { F::zero() };
        for j in 0..p {
            z[j] = (if mask[j] { F::one() } else { F::zero() }) - last;
        }
        let target = v - base - last * delta;
        for j in 0..p {
            rhs[j] += w * z[j] * target;
            for k in 0..p {
                gram[j * p + k] += w * z[j] * z[k];
            }
        }
    }
    let scale = (0..p).map(|j| gram[j * p + j]).fold(F::zero(), F::max).max(F::one());
    for j in 0..p {
        gram[j * p + j] += F::lit(1e-12) * scale;
    }
    let head = cholesky_solve(&gram, &rhs, p, F::zero())?;
    let last = delta - head.iter().copied().sum::<F>();
    Some(head.into_iter().chain(std::iter::once(last)).collect())
}

fn sampled_shapley<F: Scalar>(
    f: &(impl Fn(&[F]) -> F + ?Sized),
    x: &[F],
    background: &Matrix<F>,
    budget: usize,
    base: F,
    delta: F,
    rng: &mut Rng,
) -> Result<Vec<F>> {
    let d = x.len();
    let proper = if d < usize::BITS as usize - 1 { (1usize << d) - 2 } else { usize::MAX };
    let (masks, weights): (Vec<Vec<bool>>, Vec<F>) = if budget >= proper {
        (1..=proper)
            .map(|bits| {
                let s = bits.count_ones() as usize;
                let w = (d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64);
                (mask_of(bits, d), F::lit(w))
            })
            .unzip()
    } else {
        // sizes drawn in proportion to the total kernel weight of each size;
        // each draw is paired with its complement
        let size_w: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
        let total: f64 = size_w.iter().sum();
        let mut masks = Vec::with_capacity(budget);
        while masks.len() + 1 < budget {
            let mut u = rng.random::<f64>() * total;
            let mut s = 1;
            for (k, w) in size_w.iter().enumerate() {
                if u < *w {
                    s = k + 1;
                    break;
                }
                u -= w;
                s = k + 1;
            }
            let mut m = vec![false; d];
            for j in sample(rng, d, s) {
                m[j] = true;
            }
            let comp: Vec<bool> = m.iter().map(|b| !b).collect();
            masks.push(m);
            masks.push(comp);
        }
        masks.shuffle(rng);
        let n = masks.len();
        (masks, vec![F::one(); n])
    };
    let values: Vec<F> = masks.iter().map(|m| coalition_value(f, x, background, m)).collect();
    solve_kernel_wls(&masks, &weights, &values, base, delta)
        .ok_or_else(|| Error::Fit("kernel SHAP system is singular".into()))
}

/// Shapley attributions of `f` at `x` against a background sample.
pub fn kernel_shap<F: Scalar>(
    f: &(impl Fn(&[F]) -> F + ?Sized),
    x: &[F],
    background: &Matrix<F>,
    coalitions: Coalitions,
    rng: &mut Rng,
) -> Result<Attribution<F>> {
    let d = x.len();
    if background.rows() == 0 {
        return Err(Error::Config("SHAP background is empty".into()));
    }
    if background.cols() != d {
        return Err(Error::Dimension { expected: background.cols(), got: d });
    }
    let base = coalition_value(f, x, background, &vec![false; d]);
    let prediction = f(x);
    let delta = prediction - base;
    let values = match coalitions {
        _ if d == 0 => Vec::new(),
        _ if d == 1 => vec![delta],
        Coalitions::Exact => {
            if d > EXACT_MAX_DIM {
                return Err(Error::Config(format!("exact enumeration needs d <= {EXACT_MAX_DIM}, got {d}")));
            }
            exact_shapley(f, x, background)
        }
        Coalitions::Sampled(n) => {
            if n < 2 * d + 4 {
                return Err(Error::Config(format!("need at least {} coalitions, got {n}", 2 * d + 4)));
            }
            sampled_shapley(f, x, background, n, base, delta, rng)?
        }
    };
    Ok(Attribution { values, base, prediction })
}

/// Attributions of many instances.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionSet<F> {
    pub feature_names: Vec<String>,
    /// Instances × features.
    pub values: Matrix<F>,
    pub base: F,
    pub predictions: Vec<F>,
}

/// Explains every row of `instances`, in parallel, each with its own random stream.
pub fn explain<F: Scalar>(
    f: &(impl Fn(&[F]) -> F + Sync + ?Sized),
    instances: &Matrix<F>,
    background: &Matrix<F>,
    feature_names: Vec<String>,
    coalitions: Coalitions,
    seed: u64,
) -> Result<AttributionSet<F>> {
    let rows: Vec<Attribution<F>> = (0..instances.rows())
        .into_par_iter()
        .map(|i| kernel_shap(f, instances.row(i), background, coalitions, &mut derived_rng(seed, &[i as u64])))
        .collect::<Result<_>>()?;
    let d = instances.cols();
    let base = rows.first().map_or_else(F::zero, |r| r.base);
    let predictions = rows.iter().map(|r| r.prediction).collect();
    let values = Matrix::from_vec(rows.len(), d, rows.into_iter().flat_map(|r| r.values).collect());
    Ok(AttributionSet { feature_names, values, base, predictions })
}

/// Feature names with their mean absolute attribution, most important first.
/// Ties keep input order.
pub fn global_importance<F: Scalar>(attr: &AttributionSet<F>) -> Vec<(String, f64)> {
    let n = attr.values.rows().max(1) as f64;
    let mut ranked: Vec<(String, f64)> = attr
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let total: f64 = attr.values.column(j).iter().map(|v| v.as_f64().abs()).sum();
            (name.clone(), total / n)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Features whose importance exceeds `dominance_factor` × the median of the
/// others. `None` when there are fewer than three features.
pub fn detect_proxies(importances: &[(String, f64)], dominance_factor: f64) -> Option<Vec<String>> {
    if importances.len() < 3 {
        warn!("proxy detection skipped: {} feature(s), need at least 3", importances.len());
        return None;
    }
    let flagged = importances
        .iter()
        .enumerate()
        .filter(|(j, (_, imp))| {
            let others: Vec<f64> = importances.iter().enumerate().filter(|(k, _)| k != j).map(|(_, (_, v))| *v).collect();
            *imp > dominance_factor * median(others)
        })
        .map(|(_, (name, _))| name.clone())
        .collect();
    Some(flagged)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxyConfig {
    pub background_size: usize,
    pub explained_instances: usize,
    pub coalitions: usize,
    pub dominance_factor: f64,
    pub l2: f64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self { background_size: 100, explained_instances: 200, coalitions: 512, dominance_factor: 10.0, l2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub attribute: String,
    pub ranking: Vec<(String, f64)>,
    /// `None` when detection was skipped.
    pub flagged: Option<Vec<String>>,
    /// Training accuracy of the auxiliary model.
    pub auxiliary_accuracy: f64,
}

/// Fits a logistic model predicting group B from all classifier inputs and
/// ranks the inputs by mean |SHAP| of its probability.
pub fn proxy_analysis(cohort: &Cohort, spec: &SensitiveSpec, config: &ProxyConfig, seed: u64) -> Result<ProxyReport> {
    let n = cohort.len();
    if n == 0 {
        return Err(Error::Config("empty cohort".into()));
    }
    let raw = Matrix::from_rows(&cohort.records().iter().map(|r| r.input_row()).collect::<Vec<_>>());
    let x = Standardizer::fit(&raw).transform(&raw);
    let y: Vec<bool> = cohort.records().iter().map(|r| spec.group_of(r).index() == 1).collect();
    let fit = logreg_fit(&x, &y, config.l2, 200)?;
    if !fit.converged {
        warn!("auxiliary model for {} stopped after {} iterations", spec.attribute, fit.iterations);
    }
    let model = fit.model;
    let hits = (0..n).filter(|&i| (model.probability(x.row(i)) > 0.5) == y[i]).count();

    let mut rng = rng_from(derive_seed(seed, &[0x5A]));
    let bg_idx = sample(&mut rng, n, config.background_size.min(n)).into_vec();
    let ex_idx = sample(&mut rng, n, config.explained_instances.min(n)).into_vec();
    let d = x.cols();
    let coalitions = if d <= EXACT_MAX_DIM { Coalitions::Exact } else { Coalitions::Sampled(config.coalitions.max(2 * d + 4)) };
    let f = |row: &[f64]| model.probability(row);
    let attr = explain(&f, &x.select_rows(&ex_idx), &x.select_rows(&bg_idx), cohort.input_names(), coalitions, seed)?;
    let ranking = global_importance(&attr);
    let flagged = detect_proxies(&ranking, config.dominance_factor);
    Ok(ProxyReport {
        attribute: spec.attribute.as_str().to_string(),
        ranking,
        flagged,
        auxiliary_accuracy: hits as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bg(rows: &[[f64; 3]]) -> Matrix<f64> {
        Matrix::from_rows(rows)
    }

    #[test]
    fn linear_model_matches_closed_form() {
        let f = |x: &[f64]| 2.0 * x[0] + 3.0 * x[1];
        let background = Matrix::from_rows(&[[0.0, 0.0], [1.0, -1.0], [-1.0, 1.0]]);
        let a = kernel_shap(&f, &[1.0, 1.0], &background, Coalitions::Exact, &mut rng_from(0)).unwrap();
        assert!((a.values[0] - 2.0).abs() < 1e-12 && (a.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_model_gets_zero_attributions() {
        let f = |_: &[f64]| 0.7;
        let a = kernel_shap(&f, &[1.0, 2.0, 3.0], &bg(&[[0.0; 3], [1.0; 3]]), Coalitions::Exact, &mut rng_from(0)).unwrap();
        assert!(a.values.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(a.base, 0.7);
        let s = kernel_shap(&f, &[1.0, 2.0, 3.0], &bg(&[[0.0; 3], [1.0; 3]]), Coalitions::Sampled(10), &mut rng_from(0)).unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn full_budget_matches_exact_enumeration() {
        let f = |x: &[f64]| crate::numeric::sigmoid(x[0] * x[1] - 0.5 * x[2] + 0.3 * x[0]);
        let background = bg(&[[0.1, 0.2, -0.3], [1.0, -0.5, 0.4], [-0.7, 0.3, 0.9]]);
        let x = [0.8, -1.2, 0.5];
        let e = kernel_shap(&f, &x, &background, Coalitions::Exact, &mut rng_from(0)).unwrap();
        let s = kernel_shap(&f, &x, &background, Coalitions::Sampled(10), &mut rng_from(0)).unwrap();
        for (a, b) in e.values.iter().zip(&s.values) {
            assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
        }
        let total: f64 = e.values.iter().sum();
        assert!((total - (e.prediction - e.base)).abs() < 1e-12);
    }

    #[test]
    fn sampled_attributions_are_efficient_and_close() {
        let w = [0.5, -1.0, 0.25, 2.0, 0.0, 1.5, -0.75, 0.1, 0.3, -0.2, 0.6, 0.9, -1.1, 0.4];
        let f = |x: &[f64]| crate::numeric::sigmoid(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
        let mut rng = rng_from(2);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..14).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let background = Matrix::from_rows(&rows);
        let x: Vec<f64> = (0..14).map(|j| (j as f64 - 7.0) / 5.0).collect();
        let a = kernel_shap(&f, &x, &background, Coalitions::Sampled(2000), &mut rng_from(3)).unwrap();
        let total: f64 = a.values.iter().sum();
        assert!((total - (a.prediction - a.base)).abs() < 1e-10);
        // the zero-weight feature gets little credit
        assert!(a.values[4].abs() < 0.01);
        assert!(a.values[3].abs() > a.values[7].abs());
    }

    #[test]
    fn ranking_is_stable_and_descending() {
        let attr = AttributionSet {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            values: Matrix::from_rows(&[[0.0, 0.5, 0.0], [0.0, -0.3, 0.0]]),
            base: 0.0,
            predictions: vec![0.0, 0.0],
        };
        let r = global_importance(&attr);
        assert_eq!(r[0], ("b".to_string(), 0.4));
        assert_eq!((r[1].0.as_str(), r[2].0.as_str()), ("a", "c"));
        let zero = AttributionSet { values: Matrix::zeros(2, 3), ..attr };
        let names: Vec<String> = global_importance(&zero).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn dominant_feature_is_flagged() {
        let mut imps = vec![("tbv".to_string(), 0.4)];
        imps.extend((0..10).map(|i| (format!("roi{i}"), 0.002 + 0.0001 * i as f64)));
        assert_eq!(detect_proxies(&imps, 10.0), Some(vec!["tbv".to_string()]));
        let uniform: Vec<(String, f64)> = (0..5).map(|i| (i.to_string(), 0.1)).collect();
        assert_eq!(detect_proxies(&uniform, 10.0), Some(vec![]));
        assert_eq!(detect_proxies(&uniform[..2], 10.0), None);
    }
}
