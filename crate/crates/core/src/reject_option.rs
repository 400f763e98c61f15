//! Reject option classification: predictions whose calibrated probability
//! falls in the band `max(p, 1 - p) <= theta` are relabeled in favour of the
//! unprivileged group, with `theta` chosen to maximize equalized odds.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cohort::{stratified_kfold, Group};
use crate::error::{Error, Result};
use crate::fairness::{confusion_by_group_binary, equalized_odds_ratio};
use crate::rng::derive_seed;

pub const DEFAULT_CANDIDATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocConfig {
    pub theta: f64,
    pub unprivileged: Group,
    pub lower: f64,
    pub upper: f64,
    pub candidates: usize,
}

/// `count` equally spaced values in `(lower, upper]`.
pub fn theta_candidates(lower: f64, upper: f64, count: usize) -> Vec<f64> {
    let step = (upper - lower) / count as f64;
    (1..=count).map(|i| if i == count { upper } else { lower + step * i as f64 }).collect()
}

pub fn in_critical_region(p: f64, theta: f64) -> bool {
    p.max(1.0 - p) <= theta
}

/// Relabels every prediction inside the critical region; others pass through.
pub fn roc_apply(predicted: &[bool], probabilities: &[f64], groups: &[Group], config: &RocConfig) -> Vec<bool> {
    relabel(predicted, probabilities, groups, config.theta, config.unprivileged)
}

fn relabel(predicted: &[bool], probabilities: &[f64], groups: &[Group], theta: f64, unprivileged: Group) -> Vec<bool> {
    assert!(predicted.len() == probabilities.len() && probabilities.len() == groups.len(), "misaligned inputs");
    predicted
        .iter()
        .zip(probabilities)
        .zip(groups)
        .map(|((&pred, &p), &g)| if in_critical_region(p, theta) { g == unprivileged } else { pred })
        .collect()
}

/// The group with the lower true positive rate; B when tied or undefined.
pub fn unprivileged_group(predicted: &[bool], actual: &[bool], groups: &[Group]) -> Group {
    let gc = confusion_by_group_binary(predicted, actual, groups);
    match (gc.a.tpr::<f64>(), gc.b.tpr::<f64>()) {
        (Some(a), Some(b)) if a < b => Group::A,
        _ => Group::B,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocFit {
    pub config: RocConfig,
    /// Equalized odds at the chosen theta on the fitting data.
    pub equalized_odds: f64,
    /// Equalized odds of the unmodified predictions, if defined.
    pub baseline: Option<f64>,
}

/// Chooses theta among the lower bound and `candidates` grid points in
/// `(lower, upper]`, maximizing equalized odds; ties go to the smaller theta.
pub fn roc_fit(
    predicted: &[bool],
    probabilities: &[f64],
    actual: &[bool],
    groups: &[Group],
    bounds: (f64, f64),
    candidates: usize,
) -> Result<RocFit> {
    let (lower, upper) = bounds;
    if !(0.5..=1.0).contains(&lower) || !(lower < upper && upper <= 1.0) || candidates == 0 {
        return Err(Error::Config(format!("invalid search bounds ({lower}, {upper}) with {candidates} candidates")));
    }
    let unprivileged = unprivileged_group(predicted, actual, groups);
    let eo_of = |pred: &[bool]| equalized_odds_ratio::<f64>(&confusion_by_group_binary(pred, actual, groups));
    let baseline = eo_of(predicted);
    let mut best: Option<(f64, f64)> = None;
    for theta in std::iter::once(lower).chain(theta_candidates(lower, upper, candidates)) {
        if let Some(eo) = eo_of(&relabel(predicted, probabilities, groups, theta, unprivileged)) {
            if best.is_none_or(|(_, b)| eo > b) {
                best = Some((theta, eo));
            }
        }
    }
    let (theta, equalized_odds) =
        best.ok_or_else(|| Error::Fit("equalized odds undefined for every theta candidate".into()))?;
    Ok(RocFit {
        config: RocConfig { theta, unprivileged, lower, upper, candidates },
        equalized_odds,
        baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocBounds {
    pub lower: f64,
    pub upper: f64,
    pub fold_optima: Vec<f64>,
}

/// Widens `[min, max]` of the per-fold optima by one grid step and clips to `[0.5, 1]`.
pub fn widen_bounds(optima: &[f64], candidates: usize) -> (f64, f64) {
    let step = 0.5 / candidates as f64;
    let lo = optima.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = optima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ((lo - step).max(0.5), (hi + step).min(1.0))
}

/// Search bounds from `k` folds of validation predictions, stratified by label × group.
pub fn roc_bounds_cv(
    predicted: &[bool],
    probabilities: &[f64],
    actual: &[bool],
    groups: &[Group],
    k: usize,
    candidates: usize,
    seed: u64,
) -> Result<RocBounds> {
    let strata: Vec<usize> = actual.iter().zip(groups).map(|(&y, g)| 2 * usize::from(y) + g.index()).collect();
    let folds = stratified_kfold(&strata, k, derive_seed(seed, &[0x50C]))?;
    let mut fold_optima = Vec::new();
    let mut last_err = None;
    for idx in folds.iter() {
        let pick = |v: &[bool]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let p: Vec<f64> = idx.iter().map(|&i| probabilities[i]).collect();
        let g: Vec<Group> = idx.iter().map(|&i| groups[i]).collect();
        match roc_fit(&pick(predicted), &p, &pick(actual), &g, (0.5, 1.0), candidates) {
            Ok(fit) => fold_optima.push(fit.config.theta),
            Err(e) => {
                warn!("reject-option fold skipped: {e}");
                last_err = Some(e);
            }
        }
    }
    match fold_optima.len() {
        0 => return Err(last_err.unwrap_or_else(|| Error::Fit("no usable fold".into()))),
        1 => warn!("reject-option bounds come from a single usable fold"),
        _ => {}
    }
    let (lower, upper) = widen_bounds(&fold_optima, candidates);
    Ok(RocBounds { lower, upper, fold_optima })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn candidate_grid() {
        let c = theta_candidates(0.5, 1.0, 100);
        assert_eq!(c.len(), 100);
        assert!((c[0] - 0.505).abs() < 1e-12);
        assert!((c[1] - 0.510).abs() < 1e-12);
        assert_eq!(c[99], 1.0);
    }

    #[test]
    fn region_examples() {
        let cfg = RocConfig { theta: 0.6, unprivileged: Group::B, lower: 0.5, upper: 1.0, candidates: 100 };
        assert_eq!(roc_apply(&[false], &[0.55], &[Group::B], &cfg), vec![true]);
        assert_eq!(roc_apply(&[true], &[0.45], &[Group::A], &cfg), vec![false]);
        assert_eq!(roc_apply(&[true, false], &[0.95, 0.05], &[Group::A, Group::B], &cfg), vec![true, false]);
        let tight = RocConfig { theta: 0.5 + 1e-9, ..cfg };
        assert_eq!(roc_apply(&[true, false], &[0.7, 0.3], &[Group::A, Group::B], &tight), vec![true, false]);
    }

    #[test]
    fn widening_rule() {
        let (lo, hi) = widen_bounds(&[0.7; 5], 100);
        assert!((lo - 0.695).abs() < 1e-12 && (hi - 0.705).abs() < 1e-12);
        let (lo, hi) = widen_bounds(&[0.6, 0.65, 0.7, 0.75, 0.8], 100);
        assert!(lo <= 0.6 && hi >= 0.8);
        assert_eq!(widen_bounds(&[0.5, 1.0], 100), (0.5, 1.0));
    }

    fn biased_validation(seed: u64, n: usize) -> (Vec<bool>, Vec<f64>, Vec<bool>, Vec<Group>) {
        let mut rng = rng_from(seed);
        let (mut pred, mut prob, mut act, mut grp) = (vec![], vec![], vec![], vec![]);
        for _ in 0..n {
            let g = if rng.random::<bool>() { Group::A } else { Group::B };
            let y = rng.random::<f64>() < 0.4;
            // group B is under-predicted
            let shift = if g == Group::B { -0.15 } else { 0.0 };
            let centre: f64 = if y { 0.7 } else { 0.3 };
            let p: f64 = (centre + shift + rng.random_range(-0.25..0.25)).clamp(0.01, 0.99);
            pred.push(p > 0.5);
            prob.push(p);
            act.push(y);
            grp.push(g);
        }
        (pred, prob, act, grp)
    }

    #[test]
    fn fit_improves_biased_equalized_odds() {
        let (pred, prob, act, grp) = biased_validation(3, 2000);
        let fit = roc_fit(&pred, &prob, &act, &grp, (0.5, 1.0), 100).unwrap();
        assert_eq!(fit.config.unprivileged, Group::B);
        assert!(fit.equalized_odds >= fit.baseline.unwrap());
        assert!(fit.config.theta > 0.5);
    }

    #[test]
    fn already_fair_data_is_not_made_worse() {
        let mut rng = rng_from(8);
        let n = 1000;
        let prob: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
        let act: Vec<bool> = prob.iter().map(|&p| rng.random::<f64>() < p).collect();
        let pred: Vec<bool> = prob.iter().map(|&p| p > 0.5).collect();
        let grp: Vec<Group> = (0..n).map(|i| if i % 2 == 0 { Group::A } else { Group::B }).collect();
        let fit = roc_fit(&pred, &prob, &act, &grp, (0.5, 1.0), 100).unwrap();
        assert!(fit.equalized_odds >= fit.baseline.unwrap());
    }

    #[test]
    fn bounds_from_folds() {
        let (pred, prob, act, grp) = biased_validation(4, 2000);
        let b = roc_bounds_cv(&pred, &prob, &act, &grp, 5, 100, 1).unwrap();
        assert_eq!(b.fold_optima.len(), 5);
        assert!(b.lower >= 0.5 && b.lower < b.upper && b.upper <= 1.0);
        for t in &b.fold_optima {
            assert!(*t >= b.lower && *t <= b.upper);
        }
    }

    #[test]
    fn undefined_odds_everywhere_is_an_error() {
        // group B absent: TPR of B undefined for every theta
        let r = roc_fit(&[true, false], &[0.6, 0.4], &[true, false], &[Group::A, Group::A], (0.5, 1.0), 10);
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn only_the_critical_region_changes_and_sets_nest(
            probs in proptest::collection::vec(0.0f64..=1.0, 1..60),
            t1 in 0.5f64..=1.0,
            t2 in 0.5f64..=1.0,
            b_unpriv in any::<bool>(),
        ) {
            let n = probs.len();
            let pred: Vec<bool> = probs.iter().map(|&p| p > 0.5).collect();
            let groups: Vec<Group> = (0..n).map(|i| if i % 3 == 0 { Group::A } else { Group::B }).collect();
            let unprivileged = if b_unpriv { Group::B } else { Group::A };
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let mk = |theta| RocConfig { theta, unprivileged, lower: 0.5, upper: 1.0, candidates: 100 };
            let out_lo = roc_apply(&pred, &probs, &groups, &mk(lo));
            let out_hi = roc_apply(&pred, &probs, &groups, &mk(hi));
            for i in 0..n {
                if !in_critical_region(probs[i], lo) {
                    prop_assert_eq!(out_lo[i], pred[i]);
                }
                if out_lo[i] != pred[i] {
                    prop_assert!(out_hi[i] != pred[i]);
                }
            }
        }
    }
}
