use std::collections::BTreeMap;

use log::warn;

#[derive(Default, Clone, Copy)]
struct ClassTally {
    support: usize,
    predicted: usize,
    correct: usize,
}

fn tally<L: Ord + Copy>(predicted: &[L], actual: &[L]) -> BTreeMap<L, ClassTally> {
    assert_eq!(predicted.len(), actual.len(), "misaligned inputs");
    let mut t: BTreeMap<L, ClassTally> = BTreeMap::new();
    for (&p, &y) in predicted.iter().zip(actual) {
        t.entry(y).or_default().support += 1;
        t.entry(p).or_default().predicted += 1;
        if p == y {
            t.entry(y).or_default().correct += 1;
        }
    }
    let phantom = t.values().filter(|c| c.support == 0).count();
    if phantom > 0 {
        warn!("{phantom} predicted class(es) absent from the labels are excluded from the average");
    }
    t
}

/// Support-weighted mean of per-class F1. `None` for empty input.
pub fn weighted_f1<L: Ord + Copy>(predicted: &[L], actual: &[L]) -> Option<f64> {
    if actual.is_empty() {
        return None;
    }
    let t = tally(predicted, actual);
    let total: usize = t.values().map(|c| c.support).sum();
    let sum: f64 = t
        .values()
        .filter(|c| c.support > 0)
        .map(|c| {
            let f1 = 2.0 * c.correct as f64 / (c.support + c.predicted) as f64;
            f1 * c.support as f64
        })
        .sum();
    Some(sum / total as f64)
}

/// Mean of per-class recalls over the classes present in `actual`. `None` for empty input.
pub fn balanced_accuracy<L: Ord + Copy>(predicted: &[L], actual: &[L]) -> Option<f64> {
    if actual.is_empty() {
        return None;
    }
    let t = tally(predicted, actual);
    let recalls: Vec<f64> = t
        .values()
        .filter(|c| c.support > 0)
        .map(|c| c.correct as f64 / c.support as f64)
        .collect();
    Some(recalls.iter().sum::<f64>() / recalls.len() as f64)
}
