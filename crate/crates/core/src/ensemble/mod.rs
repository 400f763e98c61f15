//! Partitioned one-versus-one ensemble: the majority class is split in two,
//! each half yields three binary tasks, and six members vote with calibrated
//! probabilities.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cohort::Diagnosis;
use crate::rng::rng_from;

mod member;
mod metrics;
mod nested;

pub use member::{default_grid, HyperParams, MemberData, MemberLearner, SvmLearner};
pub use metrics::{balanced_accuracy, weighted_f1};
pub use nested::{
    fit_fold, nested_cv, outer_folds, CvData, CvSettings, EnsembleModel, FoldOutput, GridScore, Member,
    NestedCvResult,
};

/// A pair of diagnoses; the positive class is the more impaired one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryTask {
    #[serde(rename = "CN/MCI")]
    CnMci,
    #[serde(rename = "MCI/AD")]
    MciAd,
    #[serde(rename = "CN/AD")]
    CnAd,
}

impl BinaryTask {
    pub const ALL: [BinaryTask; 3] = [BinaryTask::CnMci, BinaryTask::MciAd, BinaryTask::CnAd];

    pub fn negative(self) -> Diagnosis {
        match self {
            BinaryTask::CnMci | BinaryTask::CnAd => Diagnosis::CN,
            BinaryTask::MciAd => Diagnosis::MCI,
        }
    }

    pub fn positive(self) -> Diagnosis {
        match self {
            BinaryTask::CnMci => Diagnosis::MCI,
            BinaryTask::MciAd | BinaryTask::CnAd => Diagnosis::AD,
        }
    }

    pub fn involves(self, d: Diagnosis) -> bool {
        d == self.negative() || d == self.positive()
    }

    /// `Some(true)` for the positive class, `Some(false)` for the negative, `None` otherwise.
    pub fn target(self, d: Diagnosis) -> Option<bool> {
        self.involves(d).then(|| d == self.positive())
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryTask::CnMci => "CN/MCI",
            BinaryTask::MciAd => "MCI/AD",
            BinaryTask::CnAd => "CN/AD",
        }
    }

    /// Whether the task trains on a majority-class half.
    pub fn uses_majority(self) -> bool {
        self.negative() == Diagnosis::CN
    }
}

impl fmt::Display for BinaryTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Position of a member in the ensemble: majority half × task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemberSlot {
    pub partition: usize,
    pub task: BinaryTask,
}

impl MemberSlot {
    /// The six slots in canonical order.
    pub fn all() -> Vec<MemberSlot> {
        (0..2)
            .flat_map(|partition| BinaryTask::ALL.into_iter().map(move |task| MemberSlot { partition, task }))
            .collect()
    }

    pub fn index(self) -> usize {
        self.partition * 3 + self.task.index()
    }
}

/// Splits the CN records among `indices` into two random halves.
///
/// Records are grouped by `strata` and each group is dealt alternately,
/// continuing from the previous group, so stratum shares match across the halves
/// and the half sizes differ by at most one.
pub fn partition_majority(labels: &[Diagnosis], strata: &[usize], indices: &[usize], seed: u64) -> [Vec<usize>; 2] {
    let mut counts = [0usize; 3];
    for &i in indices {
        counts[labels[i].index()] += 1;
    }
    if counts[0] < counts[1].max(counts[2]) {
        warn!("CN is not the majority class ({counts:?}); partitioning it anyway");
    }
    let mut by_stratum: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices.iter().filter(|&&i| labels[i] == Diagnosis::CN) {
        by_stratum.entry(strata[i]).or_default().push(i);
    }
    let mut rng = rng_from(seed);
    let mut halves = [Vec::new(), Vec::new()];
    let mut turn = 0;
    for (_, mut members) in by_stratum {
        members.shuffle(&mut rng);
        for m in members {
            halves[turn].push(m);
            turn ^= 1;
        }
    }
    halves.iter_mut().for_each(|h| h.sort_unstable());
    halves
}

/// Training set of one member: record indices and binary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub slot: MemberSlot,
    pub indices: Vec<usize>,
    pub targets: Vec<bool>,
}

/// The six member training sets. MCI and AD records of `indices` are shared by both halves.
pub fn build_tasks(partitions: &[Vec<usize>; 2], labels: &[Diagnosis], indices: &[usize]) -> Vec<TaskSet> {
    MemberSlot::all()
        .into_iter()
        .map(|slot| {
            let task = slot.task;
            let half = &partitions[slot.partition];
            let mut idx: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| labels[i] != Diagnosis::CN && task.involves(labels[i]))
                .collect();
            if task.uses_majority() {
                idx.extend(half.iter().copied());
            }
            idx.sort_unstable();
            let targets = idx.iter().map(|&i| labels[i] == task.positive()).collect();
            TaskSet { slot, indices: idx, targets }
        })
        .collect()
}

/// Per-class scores: the mean probability each class receives from the
/// members whose task involves it. Inputs are `(task, P(positive))` pairs.
pub fn class_scores(member_probs: &[(BinaryTask, f64)]) -> [f64; 3] {
    let pairs: Vec<(Diagnosis, Diagnosis, f64)> =
        member_probs.iter().map(|&(t, p)| (t.positive(), t.negative(), p)).collect();
    pair_scores(&pairs)
}

/// Like [`class_scores`], for members given as `(class, other class, P(class))`.
pub fn pair_scores(members: &[(Diagnosis, Diagnosis, f64)]) -> [f64; 3] {
    let mut contributions: [Vec<f64>; 3] = Default::default();
    for &(c, other, p) in members {
        contributions[c.index()].push(p);
        contributions[other.index()].push(1.0 - p);
    }
    contributions.map(|mut c| {
        if c.is_empty() {
            return 0.0;
        }
        // order-independent summation
        c.sort_by(f64::total_cmp);
        c.iter().sum::<f64>() / c.len() as f64
    })
}

/// Argmax of the class scores; ties go to the less impaired class.
pub fn argmax_class(scores: &[f64; 3]) -> Diagnosis {
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Diagnosis::ALL[best]
}

pub fn predict_vote(member_probs: &[(BinaryTask, f64)]) -> (Diagnosis, [f64; 3]) {
    let s = class_scores(member_probs);
    (argmax_class(&s), s)
}

/// Task-level view of a score vector: `P(positive)` renormalized over the two classes.
pub fn task_probability(scores: &[f64; 3], task: BinaryTask) -> f64 {
    let pos = scores[task.positive().index()];
    let neg = scores[task.negative().index()];
    if pos + neg > 0.0 {
        pos / (pos + neg)
    } else {
        0.5
    }
}

/// Task-level prediction: positive iff the positive class outscores the negative one.
pub fn task_prediction(scores: &[f64; 3], task: BinaryTask) -> bool {
    scores[task.positive().index()] > scores[task.negative().index()]
}
