use serde::{Deserialize, Serialize};

use crate::cohort::{Diagnosis, Group};
use crate::ensemble::BinaryTask;
use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio<F: Scalar>(num: usize, den: usize) -> Option<F> {
    (den > 0).then(|| F::from_count(num) / F::from_count(den))
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn positive_rate<F: Scalar>(&self) -> Option<F> {
        ratio(self.tp + self.fp, self.total())
    }

    pub fn tpr<F: Scalar>(&self) -> Option<F> {
        ratio(self.tp, self.positives())
    }

    pub fn fnr<F: Scalar>(&self) -> Option<F> {
        ratio(self.fn_, self.positives())
    }

    pub fn fpr<F: Scalar>(&self) -> Option<F> {
        ratio(self.fp, self.negatives())
    }

    pub fn tnr<F: Scalar>(&self) -> Option<F> {
        ratio(self.tn, self.negatives())
    }

    /// Mean of TPR and TNR; undefined unless both classes are present.
    pub fn balanced_accuracy<F: Scalar>(&self) -> Option<F> {
        Some((self.tpr::<F>()? + self.tnr::<F>()?) / F::lit(2.0))
    }

    /// Positive-class F1; undefined when there are no actual positives.
    pub fn f1<F: Scalar>(&self) -> Option<F> {
        if self.positives() == 0 {
            return None;
        }
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// Negative-class F1; undefined when there are no actual negatives.
    pub fn f1_negative<F: Scalar>(&self) -> Option<F> {
        if self.negatives() == 0 {
            return None;
        }
        ratio(2 * self.tn, 2 * self.tn + self.fn_ + self.fp)
    }

    /// Support-weighted F1 over the two classes.
    pub fn weighted_f1<F: Scalar>(&self) -> Option<F> {
        let (p, n) = (self.positives(), self.negatives());
        if p + n == 0 {
            return None;
        }
        let pos = self.f1::<F>().unwrap_or_else(F::zero) * F::from_count(p);
        let neg = self.f1_negative::<F>().unwrap_or_else(F::zero) * F::from_count(n);
        Some((pos + neg) / F::from_count(p + n))
    }

    pub fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

/// Confusion counts of one binary task, split by subgroup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub a: Confusion,
    pub b: Confusion,
}

impl GroupConfusion {
    pub fn get(&self, g: Group) -> &Confusion {
        match g {
            Group::A => &self.a,
            Group::B => &self.b,
        }
    }

    pub fn swapped(&self) -> GroupConfusion {
        GroupConfusion { a: self.b, b: self.a }
    }

    pub fn pooled(&self) -> Confusion {
        self.a.merged(&self.b)
    }

    /// Groups without any evaluated record.
    pub fn empty_groups(&self) -> Vec<Group> {
        [Group::A, Group::B]
            .into_iter()
            .filter(|&g| self.get(g).total() == 0)
            .collect()
    }
}

/// Tallies binary predictions per group.
pub fn confusion_by_group_binary(predicted: &[bool], actual: &[bool], groups: &[Group]) -> GroupConfusion {
    assert!(predicted.len() == actual.len() && actual.len() == groups.len(), "misaligned inputs");
    let mut gc = GroupConfusion::default();
    for ((&p, &y), &g) in predicted.iter().zip(actual).zip(groups) {
        match g {
            Group::A => gc.a.add(p, y),
            Group::B => gc.b.add(p, y),
        }
    }
    gc
}

/// Tallies three-class predictions for one task: only records whose true label
/// belongs to the task are counted, and a prediction is positive iff it names
/// the task's positive class.
pub fn confusion_by_group(
    predicted: &[Diagnosis],
    actual: &[Diagnosis],
    groups: &[Group],
    task: BinaryTask,
) -> GroupConfusion {
    assert!(predicted.len() == actual.len() && actual.len() == groups.len(), "misaligned inputs");
    let mut gc = GroupConfusion::default();
    for ((&p, &y), &g) in predicted.iter().zip(actual).zip(groups) {
        if !task.involves(y) {
            continue;
        }
        let (p, y) = (p == task.positive(), y == task.positive());
        match g {
            Group::A => gc.a.add(p, y),
            Group::B => gc.b.add(p, y),
        }
    }
    gc
}
