use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversarial::{default_adv_grid, AdvConfig};
use crate::cohort::{Attribute, CsvSchema, Preset, SyntheticConfig, DEFAULT_AGE_THRESHOLD};
use crate::covariate::CovariateEncoding;
use crate::ensemble::{CvSettings, HyperParams};
use crate::error::{Error, Result};
use crate::fairness::CounterfactualMode;
use crate::proxy_shap::ProxyConfig;
use crate::reject_option::DEFAULT_CANDIDATES;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "FAIRSCOPE_OUT";
const DEFAULT_OUTPUT_DIR: &str = "fairscope-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mitigation {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "pre")]
    Pre,
    #[serde(rename = "pre+proxy")]
    PreProxy,
    #[serde(rename = "in")]
    In,
    #[serde(rename = "post")]
    Post,
}

impl Mitigation {
    pub const ALL: [Mitigation; 5] = [Mitigation::None, Mitigation::Pre, Mitigation::PreProxy, Mitigation::In, Mitigation::Post];

    pub fn as_str(self) -> &'static str {
        match self {
            Mitigation::None => "none",
            Mitigation::Pre => "pre",
            Mitigation::PreProxy => "pre+proxy",
            Mitigation::In => "in",
            Mitigation::Post => "post",
        }
    }

    /// Column title in report tables.
    pub fn title(self, attribute: Attribute) -> String {
        match self {
            Mitigation::None => "No Mitigation".into(),
            Mitigation::Pre => format!("{} Correction", attribute.title()),
            Mitigation::PreProxy => format!("{} & Total Brain Volume Correction", attribute.title()),
            Mitigation::In => "Adversarial Debiasing".into(),
            Mitigation::Post => "Reject Option Classification".into(),
        }
    }

    /// Short label for charts.
    pub fn short(self) -> &'static str {
        match self {
            Mitigation::None => "None",
            Mitigation::Pre => "Correction",
            Mitigation::PreProxy => "Correction+TBV",
            Mitigation::In => "Adversarial",
            Mitigation::Post => "ROC",
        }
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A named synthetic cohort.
    Preset(Preset),
    Synthetic(SyntheticConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversarialSettings {
    pub grid: Vec<AdvConfig>,
    pub tune_folds: usize,
}

impl Default for AdversarialSettings {
    fn default() -> Self {
        Self { grid: default_adv_grid(), tune_folds: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RejectOptionSettings {
    pub candidates: usize,
    pub bounds_folds: usize,
}

impl Default for RejectOptionSettings {
    fn default() -> Self {
        Self { candidates: DEFAULT_CANDIDATES, bounds_folds: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterfactualSettings {
    pub enabled: bool,
    pub mode: CounterfactualMode,
}

impl Default for CounterfactualSettings {
    fn default() -> Self {
        Self { enabled: true, mode: CounterfactualMode::RetrainFlipped }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxySettings {
    pub enabled: bool,
    pub analysis: ProxyConfig,
}

impl Default for ProxySettings {
    fn default() -> Self {
        Self { enabled: true, analysis: ProxyConfig::default() }
    }
}

fn default_attributes() -> Vec<Attribute> {
    Attribute::ALL.to_vec()
}

fn default_mitigations() -> Vec<Mitigation> {
    Mitigation::ALL.to_vec()
}

fn default_threshold() -> f64 {
    DEFAULT_AGE_THRESHOLD
}

/// Full description of an audit run. `seed` is mandatory; everything else has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub data: DataSource,
    #[serde(default = "default_attributes")]
    pub attributes: Vec<Attribute>,
    #[serde(default = "default_threshold")]
    pub age_threshold: f64,
    #[serde(default = "default_mitigations")]
    pub mitigations: Vec<Mitigation>,
    #[serde(default)]
    pub cv: CvSettings,
    /// SVM grid; `None` uses the default grid for the input dimension.
    #[serde(default)]
    pub grid: Option<Vec<HyperParams>>,
    #[serde(default)]
    pub covariate_encoding: CovariateEncoding,
    #[serde(default)]
    pub adversarial: AdversarialSettings,
    #[serde(default)]
    pub reject_option: RejectOptionSettings,
    #[serde(default)]
    pub counterfactual: CounterfactualSettings,
    #[serde(default)]
    pub proxy: ProxySettings,
    /// Overridden by the command line; otherwise `$FAIRSCOPE_OUT`, then `fairscope-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl AuditConfig {
    /// Reads a JSON config; a relative CSV path is resolved against the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: AuditConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.attributes.is_empty() {
            return bad("at least one attribute is required");
        }
        if self.mitigations.is_empty() {
            return bad("at least one mitigation is required");
        }
        let mut attrs = self.attributes.clone();
        attrs.sort();
        attrs.dedup();
        let mut mits = self.mitigations.clone();
        mits.sort();
        mits.dedup();
        if attrs.len() != self.attributes.len() || mits.len() != self.mitigations.len() {
            return bad("attributes and mitigations must not repeat");
        }
        if self.cv.outer_k < 2 || self.cv.inner_k < 2 {
            return bad("cv.outer_k and cv.inner_k must be >= 2");
        }
        if matches!(&self.grid, Some(g) if g.is_empty()) {
            return bad("grid must not be empty");
        }
        if let Some(g) = &self.grid {
            if g.iter().any(|p| !(p.c > 0.0)) {
                return bad("every grid C must be > 0");
            }
        }
        if self.mitigations.contains(&Mitigation::In) {
            if self.adversarial.grid.is_empty() {
                return bad("adversarial.grid must not be empty");
            }
            for c in &self.adversarial.grid {
                c.validate()?;
            }
        }
        if self.reject_option.candidates == 0 || self.reject_option.bounds_folds < 2 {
            return bad("reject_option needs candidates >= 1 and bounds_folds >= 2");
        }
        if !(self.proxy.analysis.dominance_factor > 1.0) {
            return bad("proxy.dominance_factor must be > 1");
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }

    /// The output directory: the config value, else `$FAIRSCOPE_OUT`, else `fairscope-out`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    /// The config as it affects results: everything except the output directory.
    pub fn canonical(&self) -> AuditConfig {
        AuditConfig { output_dir: None, ..self.clone() }
    }

    /// SHA-256 of the canonical config's JSON, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
