use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adv_train, AdvConfig};
use crate::cohort::{stratified_kfold, Group};
use crate::error::{Error, Result};
use crate::fairness::{confusion_by_group_binary, equalized_odds_ratio, harmonic_mean};
use crate::learners::Standardizer;
use crate::linalg::Matrix;
use crate::numeric::mean;
use crate::rng::derive_seed;

/// Epochs {50, 100} × batch {64, 128} × hidden {16, 32} × alpha {0.1, 1}.
pub fn default_adv_grid() -> Vec<AdvConfig> {
    let mut grid = Vec::new();
    for epochs in [50, 100] {
        for batch_size in [64, 128] {
            for hidden_units in [16, 32] {
                for alpha in [0.1, 1.0] {
                    grid.push(AdvConfig { epochs, batch_size, hidden_units, alpha, ..AdvConfig::default() });
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneScore {
    pub config: AdvConfig,
    /// Mean cross-validated harmonic mean; `None` if every fold failed or was undefined.
    pub harmonic_mean: Option<f64>,
    pub fold_scores: Vec<Option<f64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvTuning {
    pub best: AdvConfig,
    pub scores: Vec<TuneScore>,
}

fn fold_score(
    x: &Matrix<f64>,
    y: &[bool],
    a: &[Group],
    train: &[usize],
    test: &[usize],
    config: &AdvConfig,
) -> Result<Option<f64>> {
    let st = Standardizer::fit(&x.select_rows(train));
    let xtr = st.transform(&x.select_rows(train));
    let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let atr: Vec<Group> = train.iter().map(|&i| a[i]).collect();
    let model = adv_train(&xtr, &ytr, &atr, config)?;
    let pred: Vec<bool> = test.iter().map(|&i| model.probability(&st.transform_row(x.row(i))) > 0.5).collect();
    let actual: Vec<bool> = test.iter().map(|&i| y[i]).collect();
    let groups: Vec<Group> = test.iter().map(|&i| a[i]).collect();
    let gc = confusion_by_group_binary(&pred, &actual, &groups);
    let eo = equalized_odds_ratio::<f64>(&gc);
    let wf1 = gc.pooled().weighted_f1::<f64>();
    Ok(eo.zip(wf1).map(|(e, w)| harmonic_mean(e, w)))
}

/// Picks the configuration with the best `k`-fold mean harmonic mean of
/// equalized odds and weighted F1. Folds are stratified by label × group and
/// inputs are standardized on each training part. Ties prefer smaller alpha,
/// then fewer epochs, then grid order.
pub fn adv_tune(
    x: &Matrix<f64>,
    y: &[bool],
    a: &[Group],
    grid: &[AdvConfig],
    k: usize,
    seed: u64,
) -> Result<AdvTuning> {
    if grid.is_empty() {
        return Err(Error::Config("adversarial grid is empty".into()));
    }
    let strata: Vec<usize> = y.iter().zip(a).map(|(&l, g)| 2 * usize::from(l) + g.index()).collect();
    let folds = stratified_kfold(&strata, k, derive_seed(seed, &[0x7E]))?;
    let units: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let results: Vec<Result<Option<f64>>> = units
        .par_iter()
        .map(|&(g, f)| fold_score(x, y, a, &folds.train(f), folds.test(f), &grid[g]))
        .collect();

    let mut scores = Vec::with_capacity(grid.len());
    for (g, chunk) in results.chunks(k).enumerate() {
        let mut fold_scores = Vec::with_capacity(k);
        let mut failure = None;
        for r in chunk {
            match r {
                Ok(v) => fold_scores.push(*v),
                Err(e) => {
                    failure.get_or_insert_with(|| e.to_string());
                    fold_scores.push(None);
                }
            }
        }
        let defined: Vec<f64> = fold_scores.iter().flatten().copied().collect();
        let hm = if failure.is_some() { None } else { mean(&defined) };
        scores.push(TuneScore { config: grid[g], harmonic_mean: hm, fold_scores, failure });
    }
    if scores.iter().all(|s| s.harmonic_mean.is_none()) {
        let report: Vec<String> = scores
            .iter()
            .map(|s| format!("{:?}: {}", s.config, s.failure.as_deref().unwrap_or("undefined score")))
            .collect();
        return Err(Error::Tuning(report.join("; ")));
    }
    let mut best = 0;
    for i in 1..scores.len() {
        let (s, b) = (&scores[i], &scores[best]);
        let key = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
        let ord = key(s.harmonic_mean)
            .total_cmp(&key(b.harmonic_mean))
            .then(b.config.alpha.total_cmp(&s.config.alpha))
            .then(b.config.epochs.cmp(&s.config.epochs));
        if ord == Ordering::Greater {
            best = i;
        }
    }
    Ok(AdvTuning { best: scores[best].config, scores })
}
