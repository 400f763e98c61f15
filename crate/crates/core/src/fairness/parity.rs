use log::warn;
use serde::{Deserialize, Serialize};

use super::confusion::{Confusion, GroupConfusion};
use crate::cohort::Group;
use crate::numeric::Scalar;

/// `min / max` of two non-negative values.
///
/// Both zero means no disparity (1); exactly one zero means maximal disparity (0).
/// Undefined inputs give an undefined ratio.
pub fn min_max_ratio<F: Scalar>(a: Option<F>, b: Option<F>) -> Option<F> {
    let (a, b) = (a?, b?);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi == F::zero() {
        Some(F::one())
    } else {
        Some(lo / hi)
    }
}

/// Ratio of per-group positive-prediction rates; ground truth is ignored.
pub fn demographic_parity_ratio<F: Scalar>(predicted: &[bool], groups: &[Group]) -> Option<F> {
    assert_eq!(predicted.len(), groups.len(), "misaligned inputs");
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (&p, &g) in predicted.iter().zip(groups) {
        tot[g.index()] += 1;
        pos[g.index()] += p as usize;
    }
    let rate = |k: usize| (tot[k] > 0).then(|| F::from_count(pos[k]) / F::from_count(tot[k]));
    min_max_ratio(rate(0), rate(1))
}

/// Mean of the TPR ratio and the FPR ratio.
pub fn equalized_odds_ratio<F: Scalar>(gc: &GroupConfusion) -> Option<F> {
    let tpr = min_max_ratio(gc.a.tpr::<F>(), gc.b.tpr::<F>())?;
    let fpr = min_max_ratio(gc.a.fpr::<F>(), gc.b.fpr::<F>())?;
    Some((tpr + fpr) / F::lit(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParities<F> {
    pub balanced_accuracy_parity: Option<F>,
    pub f1_parity: Option<F>,
}

/// Ratios of per-group balanced accuracy and positive-class F1.
pub fn utility_parities<F: Scalar>(gc: &GroupConfusion) -> UtilityParities<F> {
    let f1_parity = min_max_ratio(gc.a.f1::<F>(), gc.b.f1::<F>());
    if f1_parity.is_none() {
        warn!("F1 parity undefined: a subgroup has no actual positives");
    }
    UtilityParities {
        balanced_accuracy_parity: min_max_ratio(gc.a.balanced_accuracy::<F>(), gc.b.balanced_accuracy::<F>()),
        f1_parity,
    }
}

/// `2 / (1/eo + 1/wf1)`, extended continuously to 0 when either input is 0.
pub fn harmonic_mean<F: Scalar>(eo_ratio: F, weighted_f1: F) -> F {
    if eo_ratio <= F::zero() || weighted_f1 <= F::zero() {
        warn!("harmonic mean with a zero component ({eo_ratio}, {weighted_f1}) set to 0");
        return F::zero();
    }
    F::lit(2.0) / (F::one() / eo_ratio + F::one() / weighted_f1)
}

/// Raw per-group rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupRates<T> {
    pub positive_rate: T,
    pub tpr: T,
    pub fpr: T,
    pub fnr: T,
    pub tnr: T,
    pub balanced_accuracy: T,
    pub f1: T,
}

impl<T: Clone> GroupRates<T> {
    const LEN: usize = 7;

    fn to_vec(&self) -> Vec<T> {
        vec![
            self.positive_rate.clone(),
            self.tpr.clone(),
            self.fpr.clone(),
            self.fnr.clone(),
            self.tnr.clone(),
            self.balanced_accuracy.clone(),
            self.f1.clone(),
        ]
    }

    fn from_iter(it: &mut impl Iterator<Item = T>) -> Self {
        let mut next = || it.next().expect("enough values for GroupRates");
        Self {
            positive_rate: next(),
            tpr: next(),
            fpr: next(),
            fnr: next(),
            tnr: next(),
            balanced_accuracy: next(),
            f1: next(),
        }
    }
}

impl GroupRates<Option<f64>> {
    fn of(c: &Confusion) -> Self {
        Self {
            positive_rate: c.positive_rate(),
            tpr: c.tpr(),
            fpr: c.fpr(),
            fnr: c.fnr(),
            tnr: c.tnr(),
            balanced_accuracy: c.balanced_accuracy(),
            f1: c.f1(),
        }
    }
}

/// Every fairness and utility entry of one (task, attribute, mitigation) cell.
/// `T` is `Option<f64>` for a single fold and [`super::Aggregate`] across folds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParityMetrics<T> {
    pub demographic_parity_ratio: T,
    pub equalized_odds_ratio: T,
    pub balanced_accuracy_parity: T,
    pub f1_parity: T,
    pub tpr_ratio: T,
    pub fpr_ratio: T,
    pub fnr_ratio: T,
    pub tnr_ratio: T,
    pub weighted_f1: T,
    pub balanced_accuracy: T,
    pub harmonic_mean: T,
    pub group_a: GroupRates<T>,
    pub group_b: GroupRates<T>,
}

pub type ParityReport = ParityMetrics<Option<f64>>;

impl<T: Clone> ParityMetrics<T> {
    /// Entries in a fixed order; inverse of [`ParityMetrics::from_values`].
    pub fn values(&self) -> Vec<T> {
        let mut v = vec![
            self.demographic_parity_ratio.clone(),
            self.equalized_odds_ratio.clone(),
            self.balanced_accuracy_parity.clone(),
            self.f1_parity.clone(),
            self.tpr_ratio.clone(),
            self.fpr_ratio.clone(),
            self.fnr_ratio.clone(),
            self.tnr_ratio.clone(),
            self.weighted_f1.clone(),
            self.balanced_accuracy.clone(),
            self.harmonic_mean.clone(),
        ];
        v.extend(self.group_a.to_vec());
        v.extend(self.group_b.to_vec());
        v
    }

    pub fn from_values(values: Vec<T>) -> Self {
        assert_eq!(values.len(), 11 + 2 * GroupRates::<T>::LEN);
        let mut it = values.into_iter();
        let mut next = || it.next().unwrap();
        let head = [next(), next(), next(), next(), next(), next(), next(), next(), next(), next(), next()];
        let [dp, eo, bap, f1p, tpr, fpr, fnr, tnr, wf1, ba, hm] = head;
        let group_a = GroupRates::from_iter(&mut it);
        let group_b = GroupRates::from_iter(&mut it);
        Self {
            demographic_parity_ratio: dp,
            equalized_odds_ratio: eo,
            balanced_accuracy_parity: bap,
            f1_parity: f1p,
            tpr_ratio: tpr,
            fpr_ratio: fpr,
            fnr_ratio: fnr,
            tnr_ratio: tnr,
            weighted_f1: wf1,
            balanced_accuracy: ba,
            harmonic_mean: hm,
            group_a,
            group_b,
        }
    }
}

/// Builds the per-fold report of one task from its group confusion.
pub fn parity_report(gc: &GroupConfusion) -> ParityReport {
    if !gc.empty_groups().is_empty() {
        warn!("empty subgroup(s) {:?}; parity ratios are undefined", gc.empty_groups());
    }
    let ratio = |f: fn(&Confusion) -> Option<f64>| min_max_ratio(f(&gc.a), f(&gc.b));
    let eo = equalized_odds_ratio::<f64>(gc);
    let util = utility_parities::<f64>(gc);
    let pooled = gc.pooled();
    let wf1 = pooled.weighted_f1::<f64>();
    let hm = match (eo, wf1) {
        (Some(e), Some(w)) => Some(harmonic_mean(e, w)),
        _ => None,
    };
    ParityMetrics {
        demographic_parity_ratio: ratio(Confusion::positive_rate),
        equalized_odds_ratio: eo,
        balanced_accuracy_parity: util.balanced_accuracy_parity,
        f1_parity: util.f1_parity,
        tpr_ratio: ratio(Confusion::tpr),
        fpr_ratio: ratio(Confusion::fpr),
        fnr_ratio: ratio(Confusion::fnr),
        tnr_ratio: ratio(Confusion::tnr),
        weighted_f1: wf1,
        balanced_accuracy: pooled.balanced_accuracy(),
        harmonic_mean: hm,
        group_a: GroupRates::of(&gc.a),
        group_b: GroupRates::of(&gc.b),
    }
}
