use serde::{Deserialize, Serialize};

use super::{adv_train, AdvConfig, AdvModel};
use crate::ensemble::{BinaryTask, MemberData, MemberLearner};
use crate::error::Result;
use crate::rng::derive_seed;

/// Ensemble member backed by an adversarially debiased network, with one
/// tuned configuration per task. The member's inputs must include the
/// sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvLearner {
    /// Indexed by [`BinaryTask::index`].
    pub configs: [AdvConfig; 3],
}

impl MemberLearner for AdvLearner {
    type Params = ();
    type Model = AdvModel<f64>;

    fn calibrated(&self) -> bool {
        true
    }

    fn fit(&self, _: &(), task: BinaryTask, data: &MemberData, seed: u64) -> Result<AdvModel<f64>> {
        let mut cfg = self.configs[task.index()];
        cfg.seed = derive_seed(cfg.seed, &[seed]);
        adv_train(&data.x, &data.y, &data.groups, &cfg)
    }

    fn score(&self, model: &AdvModel<f64>, x: &[f64]) -> f64 {
        model.probability(x)
    }

    fn complexity(&self, _: &()) -> f64 {
        0.0
    }
}
