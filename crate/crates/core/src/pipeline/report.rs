use serde::{Deserialize, Serialize};

use super::config::{AuditConfig, Mitigation};
use crate::adversarial::AdvConfig;
use crate::cohort::Attribute;
use crate::ensemble::{BinaryTask, HyperParams};
use crate::fairness::{Aggregate, ConsistencySummary, ParityReport, ParitySummary};
use crate::proxy_shap::ProxyReport;
use crate::reject_option::RocConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the canonical config JSON (output directory excluded).
    pub config_hash: String,
    pub seed: u64,
    pub n_records: usize,
    /// Records per class, CN/MCI/AD.
    pub class_counts: [usize; 3],
    pub input_names: Vec<String>,
}

/// Three-class utility across outer folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    pub weighted_f1: Aggregate,
    pub balanced_accuracy: Aggregate,
}

/// Metrics of one (attribute, task, mitigation) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub task: BinaryTask,
    pub mitigation: Mitigation,
    pub summary: ParitySummary,
    pub folds: Vec<ParityReport>,
    /// `None` when counterfactual evaluation was disabled.
    pub counterfactual: Option<ConsistencySummary>,
}

/// What a mitigation chose, per outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Svm { fold_params: Vec<HyperParams> },
    Adversarial { task_configs: Vec<(BinaryTask, AdvConfig)>, tuned_harmonic_mean: Vec<Option<f64>> },
    RejectOption { fold_params: Vec<HyperParams>, fold_configs: Vec<Vec<(BinaryTask, RocConfig)>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationRun {
    pub mitigation: Mitigation,
    pub title: String,
    /// `None` for per-task post-processing, which has no three-class prediction.
    pub utility: Option<Utility>,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub attribute: Attribute,
    /// Labels of group A and group B.
    pub groups: (String, String),
    pub group_sizes: (usize, usize),
    pub mitigations: Vec<MitigationRun>,
    /// Task-major, mitigations in configured order.
    pub cells: Vec<Cell>,
    pub proxy: Option<ProxyReport>,
}

impl AttributeReport {
    pub fn cell(&self, task: BinaryTask, mitigation: Mitigation) -> Option<&Cell> {
        self.cells.iter().find(|c| c.task == task && c.mitigation == mitigation)
    }

    pub fn run(&self, mitigation: Mitigation) -> Option<&MitigationRun> {
        self.mitigations.iter().find(|m| m.mitigation == mitigation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub provenance: Provenance,
    pub config: AuditConfig,
    pub attributes: Vec<AttributeReport>,
}

impl AuditReport {
    pub fn attribute(&self, a: Attribute) -> Option<&AttributeReport> {
        self.attributes.iter().find(|r| r.attribute == a)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
