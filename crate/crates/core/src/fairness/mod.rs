//! Group and counterfactual fairness metrics.
//!
//! Every parity measure is a min/max ratio in `[0, 1]`. Rates whose
//! denominator is empty are undefined (`None`) and propagate as undefined.

mod aggregate;
mod confusion;
mod counterfactual;
mod parity;

pub use aggregate::{aggregate_folds, Aggregate, ParitySummary};
pub use confusion::{confusion_by_group, confusion_by_group_binary, Confusion, GroupConfusion};
pub use counterfactual::{counterfactual_consistency, Consistency, ConsistencySummary, CounterfactualMode};
pub use parity::{
    demographic_parity_ratio, equalized_odds_ratio, harmonic_mean, min_max_ratio, parity_report, utility_parities,
    GroupRates, ParityMetrics, ParityReport, UtilityParities,
};
