use serde::{Deserialize, Serialize};

use super::aggregate::Aggregate;
use crate::cohort::Group;

/// How the perturbed predictions are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterfactualMode {
    /// A second model is trained on data with every attribute value flipped.
    #[default]
    RetrainFlipped,
    /// The original model re-predicts each record with its attribute flipped.
    FlipAtInference,
}

/// Fraction of records whose prediction is unchanged under perturbation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub overall: Option<f64>,
    pub group_a: Option<f64>,
    pub group_b: Option<f64>,
}

pub fn counterfactual_consistency<T: PartialEq>(original: &[T], perturbed: &[T], groups: &[Group]) -> Consistency {
    assert!(original.len() == perturbed.len() && perturbed.len() == groups.len(), "misaligned inputs");
    let mut agree = [0usize; 2];
    let mut total = [0usize; 2];
    for ((o, p), g) in original.iter().zip(perturbed).zip(groups) {
        total[g.index()] += 1;
        agree[g.index()] += (o == p) as usize;
    }
    let frac = |a: usize, t: usize| (t > 0).then(|| a as f64 / t as f64);
    Consistency {
        overall: frac(agree[0] + agree[1], total[0] + total[1]),
        group_a: frac(agree[0], total[0]),
        group_b: frac(agree[1], total[1]),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySummary {
    pub overall: Aggregate,
    pub group_a: Aggregate,
    pub group_b: Aggregate,
}

impl ConsistencySummary {
    pub fn of(folds: &[Consistency]) -> Self {
        let pick = |f: fn(&Consistency) -> Option<f64>| Aggregate::of(&folds.iter().map(f).collect::<Vec<_>>());
        Self {
            overall: pick(|c| c.overall),
            group_a: pick(|c| c.group_a),
            group_b: pick(|c| c.group_b),
        }
    }
}
