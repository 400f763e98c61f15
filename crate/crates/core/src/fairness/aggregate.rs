use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use super::parity::{ParityMetrics, ParityReport};
use crate::numeric::{mean, sample_std};

/// Fold mean and sample standard deviation of one report entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Folds that contributed.
    pub used: usize,
    /// Folds where the entry was undefined.
    pub excluded: usize,
}

impl Aggregate {
    pub fn of(values: &[Option<f64>]) -> Aggregate {
        let defined: Vec<f64> = values.iter().flatten().copied().collect();
        let excluded = values.len() - defined.len();
        let m = mean(&defined);
        let std = match defined.len() {
            0 => None,
            1 => Some(0.0),
            _ => Some(sample_std(&defined)),
        };
        Aggregate { mean: m, std, used: defined.len(), excluded }
    }

    pub fn is_defined(&self) -> bool {
        self.mean.is_some()
    }
}

/// Renders as a table cell, e.g. `0.43 ±0.04`, or `n/a`.
impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => write!(f, "{m:.2} ±{s:.2}"),
            _ => f.write_str("n/a"),
        }
    }
}

pub type ParitySummary = ParityMetrics<Aggregate>;

/// Entry-wise aggregation of per-fold reports; undefined fold entries are skipped.
pub fn aggregate_folds(folds: &[ParityReport]) -> ParitySummary {
    if folds.len() < 2 {
        warn!("aggregating {} fold(s); standard deviations are degenerate", folds.len());
    }
    let columns: Vec<Vec<Option<f64>>> = folds.iter().map(ParityMetrics::values).collect();
    let width = ParityReport::default().values().len();
    let entries = (0..width)
        .map(|j| {
            let col: Vec<Option<f64>> = columns.iter().map(|row| row[j]).collect();
            Aggregate::of(&col)
        })
        .collect();
    let out = ParityMetrics::from_values(entries);
    let partial = out.values().iter().filter(|a| a.excluded > 0).count();
    if partial > 0 {
        warn!("{partial} report entries had undefined folds excluded");
    }
    out
}
