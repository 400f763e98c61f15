use std::fmt::Debug;

use rand::seq::SliceRandom;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::BinaryTask;
use crate::cohort::Group;
use crate::error::Result;
use crate::learners::{svm_train, KernelSpec, SvmModel, SvmParams, DEFAULT_TOL};
use crate::linalg::Matrix;
use crate::rng::rng_from;

/// Training data of one member, already standardized.
#[derive(Debug, Clone)]
pub struct MemberData {
    pub x: Matrix<f64>,
    pub y: Vec<bool>,
    /// Sensitive group of each row; only some learners use it.
    pub groups: Vec<Group>,
}

/// A binary learner that can fill an ensemble slot.
pub trait MemberLearner: Clone + Debug + Send + Sync {
    type Params: Clone + Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;
    type Model: Clone + Debug + Send + Sync;

    /// Whether [`MemberLearner::score`] is already a probability (no Platt step).
    fn calibrated(&self) -> bool;

    fn fit(&self, params: &Self::Params, task: BinaryTask, data: &MemberData, seed: u64) -> Result<Self::Model>;

    /// Decision value or probability of the positive class.
    fn score(&self, model: &Self::Model, x: &[f64]) -> f64;

    /// Model-complexity key; smaller wins selection ties.
    fn complexity(&self, params: &Self::Params) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub c: f64,
    pub kernel: KernelSpec,
}

/// `C ∈ {0.1, 1, 10}` × `{linear, rbf(γ = 1/d)}`.
pub fn default_grid(n_inputs: usize) -> Vec<HyperParams> {
    let gamma = 1.0 / n_inputs.max(1) as f64;
    let mut grid = Vec::new();
    for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma }] {
        for c in [0.1, 1.0, 10.0] {
            grid.push(HyperParams { c, kernel });
        }
    }
    grid
}

/// Soft-margin SVM member. The seed permutes the training rows.
#[derive(Debug, Clone, Copy)]
pub struct SvmLearner {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmLearner {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: 10_000_000 }
    }
}

impl MemberLearner for SvmLearner {
    type Params = HyperParams;
    type Model = SvmModel<f64>;

    fn calibrated(&self) -> bool {
        false
    }

    fn fit(&self, params: &HyperParams, _task: BinaryTask, data: &MemberData, seed: u64) -> Result<SvmModel<f64>> {
        let mut order: Vec<usize> = (0..data.x.rows()).collect();
        order.shuffle(&mut rng_from(seed));
        let x = data.x.select_rows(&order);
        let y: Vec<bool> = order.iter().map(|&i| data.y[i]).collect();
        let mut p = SvmParams::new(params.c, params.kernel);
        p.tol = self.tol;
        p.max_iter = self.max_iter;
        svm_train(&x, &y, &p)
    }

    fn score(&self, model: &SvmModel<f64>, x: &[f64]) -> f64 {
        model.decision_unchecked(x)
    }

    fn complexity(&self, params: &HyperParams) -> f64 {
        params.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_six_points() {
        let g = default_grid(4);
        assert_eq!(g.len(), 6);
        assert_eq!(g[3].kernel, KernelSpec::Rbf { gamma: 0.25 });
    }

    #[test]
    fn svm_member_scores_separable_data() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.2, 0.1], [2.0, 2.0], [2.1, 1.8]]);
        let data = MemberData { x, y: vec![false, false, true, true], groups: vec![Group::A; 4] };
        let l = SvmLearner::default();
        let m = l.fit(&HyperParams { c: 10.0, kernel: KernelSpec::Linear }, BinaryTask::CnAd, &data, 5).unwrap();
        assert!(l.score(&m, &[2.0, 2.0]) > 0.0);
        assert!(l.score(&m, &[0.0, 0.0]) < 0.0);
    }
}
