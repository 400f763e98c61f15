use std::cmp::Ordering;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::member::{MemberData, MemberLearner};
use super::metrics::{balanced_accuracy, weighted_f1};
use super::{argmax_class, build_tasks, class_scores, partition_majority, MemberSlot, TaskSet};
use crate::cohort::{stratified_kfold, Diagnosis, Folds, Group};
use crate::error::{Error, Result};
use crate::learners::{platt_fit, PlattScaler, Standardizer};
use crate::linalg::Matrix;
use crate::rng::derive_seed;

const KEY_OUTER: u64 = 1;
const KEY_FOLD: u64 = 2;
const KEY_INNER_SPLIT: u64 = 3;
const KEY_INNER_PARTITION: u64 = 4;
const KEY_INNER_MEMBER: u64 = 5;
const KEY_FINAL_PARTITION: u64 = 6;
const KEY_FINAL_MEMBER: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSettings {
    pub outer_k: usize,
    pub inner_k: usize,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self { outer_k: 5, inner_k: 4 }
    }
}

/// Everything the nested CV reads, row-aligned.
#[derive(Debug, Clone)]
pub struct CvData {
    /// Raw (unstandardized) classifier inputs.
    pub x: Matrix<f64>,
    pub labels: Vec<Diagnosis>,
    /// Stratum key per row, used for every split and for the majority partition.
    pub strata: Vec<usize>,
    pub groups: Vec<Group>,
}

impl CvData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same rows and labels with different inputs.
    pub fn with_inputs(&self, x: Matrix<f64>) -> CvData {
        assert_eq!(x.rows(), self.len());
        CvData { x, labels: self.labels.clone(), strata: self.strata.clone(), groups: self.groups.clone() }
    }

    fn member_data(&self, xs: &Matrix<f64>, set: &TaskSet) -> MemberData {
        MemberData {
            x: xs.select_rows(&set.indices),
            y: set.targets.clone(),
            groups: set.indices.iter().map(|&i| self.groups[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Member<M> {
    pub slot: MemberSlot,
    pub model: M,
    pub scaler: Option<PlattScaler<f64>>,
}

/// Six trained members sharing one input standardization.
#[derive(Debug, Clone)]
pub struct EnsembleModel<L: MemberLearner> {
    learner: L,
    standardizer: Standardizer<f64>,
    members: Vec<Member<L::Model>>,
}

fn to_probability<L: MemberLearner>(learner: &L, scaler: Option<&PlattScaler<f64>>, score: f64) -> f64 {
    match scaler {
        Some(s) => s.probability(score),
        None if learner.calibrated() => score.clamp(0.0, 1.0),
        None => crate::numeric::sigmoid(score),
    }
}

impl<L: MemberLearner> EnsembleModel<L> {
    pub fn members(&self) -> &[Member<L::Model>] {
        &self.members
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    /// Calibrated `P(positive)` of every member for one raw input row.
    pub fn member_probabilities(&self, x: &[f64]) -> Vec<(MemberSlot, f64)> {
        let z = self.standardizer.transform_row(x);
        self.standardized_probabilities(&z)
    }

    fn standardized_probabilities(&self, z: &[f64]) -> Vec<(MemberSlot, f64)> {
        self.members
            .iter()
            .map(|m| (m.slot, to_probability(&self.learner, m.scaler.as_ref(), self.learner.score(&m.model, z))))
            .collect()
    }

    pub fn scores(&self, x: &[f64]) -> Result<[f64; 3]> {
        if x.len() != self.standardizer.dim() {
            return Err(Error::Dimension { expected: self.standardizer.dim(), got: x.len() });
        }
        let probs: Vec<_> = self.member_probabilities(x).into_iter().map(|(s, p)| (s.task, p)).collect();
        Ok(class_scores(&probs))
    }

    pub fn predict(&self, x: &[f64]) -> Result<(Diagnosis, [f64; 3])> {
        let s = self.scores(x)?;
        Ok((argmax_class(&s), s))
    }
}

/// Inner-CV utility of one grid point, measured on the outer-train split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore<P> {
    pub params: P,
    pub weighted_f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FoldOutput<L: MemberLearner> {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub selected: L::Params,
    pub grid: Vec<GridScore<L::Params>>,
    pub model: EnsembleModel<L>,
    /// Class scores of `test`, in order.
    pub test_scores: Vec<[f64; 3]>,
    /// Inner out-of-fold class scores of `train` under the selected parameters.
    /// Absent when no inner CV was needed.
    pub validation_scores: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone)]
pub struct NestedCvResult<L: MemberLearner> {
    pub outer: Folds,
    pub folds: Vec<FoldOutput<L>>,
    /// Out-of-fold class scores per record.
    pub oof_scores: Vec<[f64; 3]>,
}

impl<L: MemberLearner> NestedCvResult<L> {
    pub fn from_folds(n: usize, outer: Folds, folds: Vec<FoldOutput<L>>) -> Result<Self> {
        let mut oof = vec![None; n];
        for f in &folds {
            for (&i, s) in f.test.iter().zip(&f.test_scores) {
                if oof[i].replace(*s).is_some() {
                    return Err(Error::Contract(format!("record {i} predicted twice out of fold")));
                }
            }
        }
        let oof_scores = oof
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::Contract(format!("record {i} never predicted out of fold"))))
            .collect::<Result<_>>()?;
        Ok(Self { outer, folds, oof_scores })
    }

    pub fn predictions(&self) -> Vec<Diagnosis> {
        self.oof_scores.iter().map(argmax_class).collect()
    }
}

/// Outer folds stratified by the data's strata.
pub fn outer_folds(data: &CvData, settings: &CvSettings, seed: u64) -> Result<Folds> {
    stratified_kfold(&data.strata, settings.outer_k, derive_seed(seed, &[KEY_OUTER]))
}

/// Full nested CV: outer folds run in parallel, each with its own inner selection.
pub fn nested_cv<L: MemberLearner>(
    data: &CvData,
    grid: &[L::Params],
    learner: &L,
    settings: &CvSettings,
    seed: u64,
) -> Result<NestedCvResult<L>> {
    let outer = outer_folds(data, settings, seed)?;
    let folds = (0..outer.k())
        .into_par_iter()
        .map(|f| fit_fold(data, f, &outer.train(f), outer.test(f), grid, learner, settings.inner_k, seed))
        .collect::<Result<Vec<_>>>()?;
    NestedCvResult::from_folds(data.len(), outer, folds)
}

fn compare_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    let key = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
    key(a).total_cmp(&key(b))
}

/// Index of the best grid point: weighted F1, then balanced accuracy,
/// then smaller complexity, then grid order.
fn select<L: MemberLearner>(learner: &L, scores: &[GridScore<L::Params>]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best];
        let ord = compare_opt(s.weighted_f1, b.weighted_f1)
            .then(compare_opt(s.balanced_accuracy, b.balanced_accuracy))
            .then(learner.complexity(&b.params).total_cmp(&learner.complexity(&s.params)));
        if ord == Ordering::Greater {
            best = i;
        }
    }
    best
}

struct InnerSplit {
    test: Vec<usize>,
    sets: Vec<TaskSet>,
}

/// One outer fold: inner selection (when needed), then retraining on all of `train`.
#[allow(clippy::too_many_arguments)]
pub fn fit_fold<L: MemberLearner>(
    data: &CvData,
    fold: usize,
    train: &[usize],
    test: &[usize],
    grid: &[L::Params],
    learner: &L,
    inner_k: usize,
    seed: u64,
) -> Result<FoldOutput<L>> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    let seed = derive_seed(seed, &[KEY_FOLD, fold as u64]);
    let standardizer = Standardizer::fit(&data.x.select_rows(train));
    let xs = standardizer.transform(&data.x);
    let slots = MemberSlot::all();

    let needs_inner = grid.len() > 1 || !learner.calibrated();
    let (selected_idx, grid_scores, scalers, validation_scores) = if needs_inner {
        let inner_strata: Vec<usize> = train.iter().map(|&i| data.strata[i]).collect();
        let inner = stratified_kfold(&inner_strata, inner_k, derive_seed(seed, &[KEY_INNER_SPLIT]))?;
        let splits: Vec<InnerSplit> = (0..inner.k())
            .map(|i| {
                let tr: Vec<usize> = inner.train(i).iter().map(|&p| train[p]).collect();
                let te: Vec<usize> = inner.test(i).iter().map(|&p| train[p]).collect();
                let parts = partition_majority(&data.labels, &data.strata, &tr, derive_seed(seed, &[KEY_INNER_PARTITION, i as u64]));
                InnerSplit { test: te, sets: build_tasks(&parts, &data.labels, &tr) }
            })
            .collect();

        // raw member scores on inner-test rows, keyed by (grid point, split, slot)
        let units: Vec<(usize, usize, usize)> = (0..grid.len())
            .flat_map(|g| (0..splits.len()).flat_map(move |i| (0..6).map(move |s| (g, i, s))))
            .collect();
        let raw: Vec<Vec<f64>> = units
            .par_iter()
            .map(|&(g, i, s)| {
                let split = &splits[i];
                let set = &split.sets[s];
                let md = data.member_data(&xs, set);
                let member_seed = derive_seed(seed, &[KEY_INNER_MEMBER, i as u64, s as u64]);
                let model = learner.fit(&grid[g], set.slot.task, &md, member_seed)?;
                Ok(split.test.iter().map(|&r| learner.score(&model, xs.row(r))).collect())
            })
            .collect::<Result<_>>()?;
        let raw_at = |g: usize, i: usize, s: usize| &raw[(g * splits.len() + i) * 6 + s];

        // position of each outer-train record within `train`
        let mut pos = vec![usize::MAX; data.len()];
        for (p, &r) in train.iter().enumerate() {
            pos[r] = p;
        }

        let mut evaluated = Vec::with_capacity(grid.len());
        for g in 0..grid.len() {
            let mut scalers = Vec::with_capacity(6);
            for (s, slot) in slots.iter().enumerate() {
                if learner.calibrated() {
                    scalers.push(None);
                    continue;
                }
                let (mut d, mut y) = (Vec::new(), Vec::new());
                for (i, split) in splits.iter().enumerate() {
                    for (&r, &v) in split.test.iter().zip(raw_at(g, i, s)) {
                        if let Some(t) = slot.task.target(data.labels[r]) {
                            d.push(v);
                            y.push(t);
                        }
                    }
                }
                scalers.push(Some(platt_fit(&d, &y)?));
            }
            let mut scores = vec![[0.0; 3]; train.len()];
            for (i, split) in splits.iter().enumerate() {
                for (k, &r) in split.test.iter().enumerate() {
                    let probs: Vec<_> = slots
                        .iter()
                        .enumerate()
                        .map(|(s, slot)| (slot.task, to_probability(learner, scalers[s].as_ref(), raw_at(g, i, s)[k])))
                        .collect();
                    scores[pos[r]] = class_scores(&probs);
                }
            }
            let pred: Vec<Diagnosis> = scores.iter().map(argmax_class).collect();
            let actual: Vec<Diagnosis> = train.iter().map(|&r| data.labels[r]).collect();
            let gs = GridScore {
                params: grid[g].clone(),
                weighted_f1: weighted_f1(&pred, &actual),
                balanced_accuracy: balanced_accuracy(&pred, &actual),
            };
            evaluated.push((gs, scalers, scores));
        }
        let grid_scores: Vec<GridScore<L::Params>> = evaluated.iter().map(|e| e.0.clone()).collect();
        let best = select(learner, &grid_scores);
        let (_, scalers, scores) = evaluated.swap_remove(best);
        (best, grid_scores, scalers, Some(scores))
    } else {
        let gs = GridScore { params: grid[0].clone(), weighted_f1: None, balanced_accuracy: None };
        (0, vec![gs], vec![None; 6], None)
    };
    let selected = grid[selected_idx].clone();
    debug!("fold {fold}: selected {selected:?}");

    let parts = partition_majority(&data.labels, &data.strata, train, derive_seed(seed, &[KEY_FINAL_PARTITION]));
    let sets = build_tasks(&parts, &data.labels, train);
    let models = sets
        .par_iter()
        .enumerate()
        .map(|(s, set)| {
            let md = data.member_data(&xs, set);
            learner.fit(&selected, set.slot.task, &md, derive_seed(seed, &[KEY_FINAL_MEMBER, s as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let members = sets
        .iter()
        .zip(models)
        .zip(scalers)
        .map(|((set, model), scaler)| Member { slot: set.slot, model, scaler })
        .collect();
    let model = EnsembleModel { learner: learner.clone(), standardizer, members };
    let test_scores = test
        .iter()
        .map(|&r| {
            let probs: Vec<_> = model.standardized_probabilities(xs.row(r)).into_iter().map(|(s, p)| (s.task, p)).collect();
            class_scores(&probs)
        })
        .collect();
    Ok(FoldOutput {
        fold,
        train: train.to_vec(),
        test: test.to_vec(),
        selected,
        grid: grid_scores,
        model,
        test_scores,
        validation_scores,
    })
}
