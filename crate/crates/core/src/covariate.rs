//! Linear covariate adjustment: every classifier input is regressed on the
//! sensitive attribute (and optionally total brain volume) over the CN records
//! of a training split, and replaced by its residual everywhere.

use serde::{Deserialize, Serialize};

use crate::cohort::{Attribute, Cohort, Diagnosis, Record, SensitiveSpec};
use crate::error::{Error, Result};
use crate::learners::{ols_fit, LinearModel};
use crate::linalg::Matrix;

/// How the attribute enters the regression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateEncoding {
    /// Group A → 0, group B → 1.
    #[default]
    GroupIndicator,
    /// Age in years for the age attribute; other attributes use the indicator.
    RawAge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateModelSet {
    pub spec: SensitiveSpec,
    pub include_proxy: bool,
    pub encoding: CovariateEncoding,
    /// One model per classifier input column (features, then total brain volume).
    pub models: Vec<LinearModel<f64>>,
    pub input_names: Vec<String>,
    /// Cohort indices the models were fit on.
    pub fitted_on: Vec<usize>,
}

impl CovariateModelSet {
    pub fn covariates(&self, r: &Record) -> Vec<f64> {
        covariate_row(&self.spec, self.include_proxy, self.encoding, r)
    }
}

fn covariate_row(spec: &SensitiveSpec, include_proxy: bool, encoding: CovariateEncoding, r: &Record) -> Vec<f64> {
    let a = match (encoding, spec.attribute) {
        (CovariateEncoding::RawAge, Attribute::Age) => r.age,
        _ => spec.group_of(r).indicator(),
    };
    if include_proxy {
        vec![a, r.total_brain_volume]
    } else {
        vec![a]
    }
}

/// Fits one OLS model per input column on the CN records among `train`.
pub fn fit_covariates(
    cohort: &Cohort,
    train: &[usize],
    spec: &SensitiveSpec,
    include_proxy: bool,
    encoding: CovariateEncoding,
) -> Result<CovariateModelSet> {
    let records = cohort.records();
    let cn: Vec<usize> = train.iter().copied().filter(|&i| records[i].label == Diagnosis::CN).collect();
    if cn.is_empty() {
        return Err(Error::Fit("no CN records in the training split".into()));
    }
    let cov_rows: Vec<Vec<f64>> = cn
        .iter()
        .map(|&i| covariate_row(spec, include_proxy, encoding, &records[i]))
        .collect();
    let first = cov_rows[0][0];
    if cov_rows.iter().all(|r| r[0] == first) {
        return Err(Error::Fit(format!(
            "{} is constant over the {} CN training records",
            spec.attribute,
            cn.len()
        )));
    }
    let covs = Matrix::from_rows(&cov_rows);
    let inputs: Vec<Vec<f64>> = cn.iter().map(|&i| records[i].input_row()).collect();
    let n_inputs = cohort.n_features() + 1;
    let models = (0..n_inputs)
        .map(|j| {
            let y: Vec<f64> = inputs.iter().map(|r| r[j]).collect();
            ols_fit(&covs, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CovariateModelSet {
        spec: *spec,
        include_proxy,
        encoding,
        models,
        input_names: cohort.input_names(),
        fitted_on: cn,
    })
}

fn check_names(cohort: &Cohort, set: &CovariateModelSet) -> Result<()> {
    if cohort.input_names() != set.input_names {
        return Err(Error::Contract("covariate models were fit on different columns".into()));
    }
    Ok(())
}

/// Residualized classifier inputs (features and total brain volume) of every record.
pub fn residualize_inputs(cohort: &Cohort, set: &CovariateModelSet) -> Result<Matrix<f64>> {
    check_names(cohort, set)?;
    let rows: Vec<Vec<f64>> = cohort
        .records()
        .iter()
        .map(|r| {
            let c = set.covariates(r);
            r.input_row().iter().zip(&set.models).map(|(&v, m)| v - m.predict(&c)).collect()
        })
        .collect();
    Ok(Matrix::from_rows(&rows))
}

/// Cohort with residualized features. Total brain volume is kept as recorded,
/// since it must stay a positive volume; use [`residualize_inputs`] for the
/// adjusted classifier inputs.
pub fn residualize(cohort: &Cohort, set: &CovariateModelSet) -> Result<Cohort> {
    let inputs = residualize_inputs(cohort, set)?;
    let d = cohort.n_features();
    let features = inputs.iter_rows().map(|r| r[..d].to_vec()).collect();
    cohort.with_features(features)
}
