//! Participant records, sensitive-attribute grouping and fold construction.

mod csv_io;
mod folds;
mod presets;
mod synthetic;

pub use csv_io::{load_csv, write_csv, CsvSchema, LoadedCohort};
pub use folds::{stratified_kfold, Folds};
pub use presets::{Preset, PRESET_SEED};
pub use synthetic::{generate_synthetic, ClassCounts, PerAttribute, SyntheticConfig, SKEW_REFERENCE};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Median participant age; the default split between the two age groups.
pub const DEFAULT_AGE_THRESHOLD: f64 = 69.0;

/// Diagnostic class. Ordered by impairment: CN < MCI < AD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diagnosis {
    CN,
    MCI,
    AD,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 3] = [Diagnosis::CN, Diagnosis::MCI, Diagnosis::AD];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::CN => "CN",
            Diagnosis::MCI => "MCI",
            Diagnosis::AD => "AD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CN" => Some(Diagnosis::CN),
            "MCI" => Some(Diagnosis::MCI),
            "AD" => Some(Diagnosis::AD),
            _ => None,
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Race {
    White,
    Black,
}

/// Sensitive attribute audited for fairness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Race,
    Age,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Gender, Attribute::Race, Attribute::Age];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Race => "race",
            Attribute::Age => "age",
        }
    }

    /// Title-case name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Attribute::Gender => "Gender",
            Attribute::Race => "Race",
            Attribute::Age => "Age",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the two subgroups of a binarized attribute. Encoded as 0 (A) / 1 (B)
/// wherever an indicator column is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

impl Group {
    #[inline]
    pub fn indicator(self) -> f64 {
        match self {
            Group::A => 0.0,
            Group::B => 1.0,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn flipped(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }
}

/// How an attribute is split into two groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    pub attribute: Attribute,
    /// Only used for [`Attribute::Age`]; ages at or below it fall in group A.
    #[serde(default = "default_threshold")]
    pub age_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_AGE_THRESHOLD
}

impl SensitiveSpec {
    pub fn new(attribute: Attribute) -> Self {
        Self {
            attribute,
            age_threshold: DEFAULT_AGE_THRESHOLD,
        }
    }

    /// Human-readable labels for (group A, group B).
    pub fn group_labels(&self) -> (String, String) {
        match self.attribute {
            Attribute::Gender => ("male".into(), "female".into()),
            Attribute::Race => ("white".into(), "black".into()),
            Attribute::Age => (
                format!("age <= {}", self.age_threshold),
                format!("age > {}", self.age_threshold),
            ),
        }
    }

    pub fn group_of(&self, r: &Record) -> Group {
        match self.attribute {
            Attribute::Gender => match r.gender {
                Gender::Male => Group::A,
                Gender::Female => Group::B,
            },
            Attribute::Race => match r.race {
                Race::White => Group::A,
                Race::Black => Group::B,
            },
            Attribute::Age => {
                if r.age <= self.age_threshold {
                    Group::A
                } else {
                    Group::B
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    /// Harmonized ROI volumes (mm^3).
    pub features: Vec<f64>,
    pub total_brain_volume: f64,
    pub gender: Gender,
    pub race: Race,
    pub age: f64,
    pub label: Diagnosis,
}

impl Record {
    /// Classifier input: ROI volumes followed by total brain volume.
    pub fn input_row(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.features.len() + 1);
        v.extend_from_slice(&self.features);
        v.push(self.total_brain_volume);
        v
    }
}

/// An immutable, validated table of participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    feature_names: Vec<String>,
    records: Vec<Record>,
}

impl Cohort {
    pub fn new(feature_names: Vec<String>, records: Vec<Record>) -> Result<Self> {
        let d = feature_names.len();
        let mut seen = HashSet::with_capacity(records.len());
        for (row, r) in records.iter().enumerate() {
            let bad = |reason: String| Error::InvalidRecord { row: row + 1, reason };
            if !seen.insert(r.id.as_str()) {
                return Err(bad(format!("duplicate id `{}`", r.id)));
            }
            if r.features.len() != d {
                return Err(bad(format!(
                    "expected {d} features, found {}",
                    r.features.len()
                )));
            }
            if !(0.0..=130.0).contains(&r.age) {
                return Err(bad(format!("age {} outside [0, 130]", r.age)));
            }
            if !(r.total_brain_volume > 0.0) || !r.total_brain_volume.is_finite() {
                return Err(bad(format!(
                    "total brain volume {} is not positive",
                    r.total_brain_volume
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite feature value".into()));
            }
        }
        Ok(Self {
            feature_names,
            records,
        })
    }

    #[inline]
    pub fn records(&self) -> &[Record] {
        &self.records
    }

    #[inline]
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Names of the classifier input columns (ROIs then total brain volume).
    pub fn input_names(&self) -> Vec<String> {
        let mut v = self.feature_names.clone();
        v.push("total_brain_volume".into());
        v
    }

    pub fn labels(&self) -> Vec<Diagnosis> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }

    /// Returns a copy with every record's ROI features replaced.
    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.records.len() {
            return Err(Error::Dimension {
                expected: self.records.len(),
                got: features.len(),
            });
        }
        let records = self
            .records
            .iter()
            .zip(features)
            .map(|(r, f)| Record {
                features: f,
                ..r.clone()
            })
            .collect();
        Cohort::new(self.feature_names.clone(), records)
    }

    /// Joint stratum key per record: label and the group of each listed attribute.
    pub fn strata(&self, specs: &[SensitiveSpec]) -> Vec<usize> {
        self.records
            .iter()
            .map(|r| {
                specs.iter().fold(r.label.index(), |key, s| {
                    key * 2 + s.group_of(r).index()
                })
            })
            .collect()
    }
}

/// Assigns every record to group A or B.
pub fn binarize(cohort: &Cohort, spec: &SensitiveSpec) -> Vec<Group> {
    cohort.records().iter().map(|r| spec.group_of(r)).collect()
}
