pub mod adversarial;
pub mod cohort;
pub mod covariate;
pub mod ensemble;
pub mod error;
pub mod fairness;
pub mod learners;
pub mod linalg;
pub mod numeric;
pub mod pipeline;
pub mod proxy_shap;
pub mod reject_option;
pub mod rng;

pub use error::{Error, Result};

/// Double-precision instantiations of the generic models.
pub type Matrix = linalg::Matrix<f64>;
pub type Svm = learners::SvmModel<f64>;
pub type Platt = learners::PlattScaler<f64>;
pub type Linear = learners::LinearModel<f64>;
pub type Logistic = learners::LogisticModel<f64>;
pub type Standardizer = learners::Standardizer<f64>;
pub type AdvModel = adversarial::AdvModel<f64>;
pub type Attribution = proxy_shap::Attribution<f64>;

/// Single-precision instantiations.
pub type Matrix32 = linalg::Matrix<f32>;
pub type Svm32 = learners::SvmModel<f32>;
pub type AdvModel32 = adversarial::AdvModel<f32>;
