//! Numeric learners shared by the ensemble, mitigation and attribution code.

mod kernel;
mod logistic;
mod ols;
mod platt;
mod standardize;
mod svm;

pub use kernel::KernelSpec;
pub use logistic::{logreg_fit, LogisticFit, LogisticModel};
pub use ols::{ols_fit, LinearModel};
pub use platt::{platt_fit, PlattScaler};
pub use standardize::Standardizer;
pub use svm::{svm_train, svm_train_detailed, SvmModel, SvmParams, SvmSolution, DEFAULT_TOL};
