//! Synthetic cohorts with controllable, per-attribute bias injection.
//!
//! Latent features are class-conditional isotropic Gaussians whose means sit at
//! `0, s, 2s` (CN, MCI, AD) along a random unit direction `u`. Group B of every
//! attribute (female, black, older) is the one that receives the mean shift and
//! the label noise. Subgroup membership is assigned by exact per-class quota,
//! so with every knob at zero the groups have identical class composition.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Attribute, Cohort, Diagnosis, Gender, Group, Race, Record, DEFAULT_AGE_THRESHOLD};
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Skew value at which the generator reproduces the reference per-class shares.
pub const SKEW_REFERENCE: f64 = 0.8;

/// Reference cohort size per class (CN, MCI, AD).
const REFERENCE_COUNTS: [f64; 3] = [6829.0, 1191.0, 1135.0];

/// Share of group A (male, white, age <= 69) within each class (CN, MCI, AD).
fn reference_shares(attribute: Attribute) -> [f64; 3] {
    match attribute {
        Attribute::Gender => [0.428, 0.566, 0.478],
        Attribute::Race => [0.864, 0.943, 0.890],
        Attribute::Age => [0.605, 0.275, 0.159],
    }
}

/// Cohort-wide share of group A implied by the reference shares.
fn base_share(attribute: Attribute) -> f64 {
    let s = reference_shares(attribute);
    let total: f64 = REFERENCE_COUNTS.iter().sum();
    REFERENCE_COUNTS.iter().zip(s).map(|(n, p)| n * p).sum::<f64>() / total
}

/// Share of group A in `class` at the given prevalence skew.
pub(crate) fn skewed_share(attribute: Attribute, class: Diagnosis, skew: f64) -> f64 {
    let base = base_share(attribute);
    let target = reference_shares(attribute)[class.index()];
    (base + skew / SKEW_REFERENCE * (target - base)).clamp(0.01, 0.99)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCounts {
    pub cn: usize,
    pub mci: usize,
    pub ad: usize,
}

impl ClassCounts {
    pub fn get(&self, d: Diagnosis) -> usize {
        match d {
            Diagnosis::CN => self.cn,
            Diagnosis::MCI => self.mci,
            Diagnosis::AD => self.ad,
        }
    }

    pub fn total(&self) -> usize {
        self.cn + self.mci + self.ad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerAttribute<T> {
    pub gender: T,
    pub race: T,
    pub age: T,
}

impl<T: Copy> PerAttribute<T> {
    pub fn get(&self, a: Attribute) -> T {
        match a {
            Attribute::Gender => self.gender,
            Attribute::Race => self.race,
            Attribute::Age => self.age,
        }
    }

    pub fn set(&mut self, a: Attribute, v: T) {
        match a {
            Attribute::Gender => self.gender = v,
            Attribute::Race => self.race = v,
            Attribute::Age => self.age = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_per_class: ClassCounts,
    pub n_features: usize,
    /// Distance between adjacent class means in latent (unit-variance) space.
    pub class_separation: f64,
    /// 0 = identical group shares in every class; `SKEW_REFERENCE` = reference shares.
    pub prevalence_skew: PerAttribute<f64>,
    /// Latent mean displacement of group B along the disease direction.
    pub subgroup_shift: PerAttribute<f64>,
    /// Probability that a group-B label is moved to an adjacent class.
    pub subgroup_label_noise: PerAttribute<f64>,
    /// Loading of total brain volume on gender and age.
    pub proxy_strength: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_per_class: ClassCounts {
                cn: 2000,
                mci: 400,
                ad: 400,
            },
            n_features: 20,
            class_separation: 3.0,
            prevalence_skew: PerAttribute::default(),
            subgroup_shift: PerAttribute::default(),
            subgroup_label_noise: PerAttribute::default(),
            proxy_strength: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if Diagnosis::ALL.iter().any(|&d| self.n_per_class.get(d) == 0) {
            return bad("every class count must be positive".into());
        }
        if self.n_features < 2 {
            return bad(format!("n_features must be >= 2, got {}", self.n_features));
        }
        if !(self.class_separation >= 0.0) || !self.class_separation.is_finite() {
            return bad(format!("class_separation must be >= 0, got {}", self.class_separation));
        }
        if !(self.proxy_strength >= 0.0) || !self.proxy_strength.is_finite() {
            return bad(format!("proxy_strength must be >= 0, got {}", self.proxy_strength));
        }
        for a in Attribute::ALL {
            let skew = self.prevalence_skew.get(a);
            if !(0.0..=1.0).contains(&skew) {
                return bad(format!("prevalence_skew.{a} must lie in [0, 1], got {skew}"));
            }
            let shift = self.subgroup_shift.get(a);
            if !(shift >= 0.0) || !shift.is_finite() {
                return bad(format!("subgroup_shift.{a} must be >= 0, got {shift}"));
            }
            let noise = self.subgroup_label_noise.get(a);
            if !(0.0..=0.5).contains(&noise) {
                return bad(format!("subgroup_label_noise.{a} must lie in [0, 0.5], got {noise}"));
            }
        }
        Ok(())
    }
}

fn adjacent_class(d: Diagnosis, coin: bool) -> Diagnosis {
    match d {
        Diagnosis::CN | Diagnosis::AD => Diagnosis::MCI,
        Diagnosis::MCI if coin => Diagnosis::AD,
        Diagnosis::MCI => Diagnosis::CN,
    }
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Cohort> {
    config.validate()?;
    let mut rng = rng_from(config.seed);
    let d = config.n_features;

    let mut direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    direction.iter_mut().for_each(|v| *v /= norm);

    // Per-ROI volume scale in mm^3.
    let offsets: Vec<f64> = (0..d).map(|_| rng.random_range(1000.0..10000.0)).collect();

    let normal = StandardNormal;
    let mut records = Vec::with_capacity(config.n_per_class.total());
    for class in Diagnosis::ALL {
        let n = config.n_per_class.get(class);
        let mut groups: Vec<[Group; 3]> = vec![[Group::A; 3]; n];
        for (k, attr) in Attribute::ALL.into_iter().enumerate() {
            let share = skewed_share(attr, class, config.prevalence_skew.get(attr));
            let n_a = (share * n as f64).round() as usize;
            let mut assign: Vec<Group> = (0..n).map(|i| if i < n_a { Group::A } else { Group::B }).collect();
            assign.shuffle(&mut rng);
            for (g, a) in groups.iter_mut().zip(assign) {
                g[k] = a;
            }
        }

        for g in groups {
            // Fixed number of draws per record regardless of the knobs.
            let noise: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
            let tbv_noise: f64 = normal.sample(&mut rng);
            let flip_u: f64 = rng.random();
            let coin: bool = rng.random();
            let age_u: f64 = rng.random();

            let in_b = |a: Attribute| g[a as usize] == Group::B;
            let shift: f64 = Attribute::ALL
                .iter()
                .filter(|&&a| in_b(a))
                .map(|&a| config.subgroup_shift.get(a))
                .sum();
            let level = config.class_separation * class.index() as f64 + shift;
            let features: Vec<f64> = (0..d)
                .map(|j| {
                    let z = level * direction[j] + noise[j];
                    offsets[j] * (1.0 + 0.05 * z)
                })
                .collect();

            let sign = |a: Attribute| if in_b(a) { -1.0 } else { 1.0 };
            let tbv_z = config.proxy_strength * (sign(Attribute::Gender) + sign(Attribute::Age))
                / std::f64::consts::SQRT_2
                + tbv_noise;
            let total_brain_volume = (1.15e6 + 1.1e5 * tbv_z).max(4.0e5);

            let age = if in_b(Attribute::Age) {
                // 70..=103
                (DEFAULT_AGE_THRESHOLD + 1.0 + (age_u * 34.0).floor()).min(103.0)
            } else {
                // 49..=69
                (49.0 + (age_u * 21.0).floor()).min(DEFAULT_AGE_THRESHOLD)
            };

            let keep = Attribute::ALL
                .iter()
                .filter(|&&a| in_b(a))
                .map(|&a| 1.0 - config.subgroup_label_noise.get(a))
                .product::<f64>();
            let label = if flip_u < 1.0 - keep {
                adjacent_class(class, coin)
            } else {
                class
            };

            records.push(Record {
                id: String::new(),
                features,
                total_brain_volume,
                gender: if in_b(Attribute::Gender) { Gender::Female } else { Gender::Male },
                race: if in_b(Attribute::Race) { Race::Black } else { Race::White },
                age,
                label,
            });
        }
    }
    records.shuffle(&mut rng);
    for (i, r) in records.iter_mut().enumerate() {
        r.id = format!("S{:05}", i + 1);
    }
    let names = (1..=d).map(|j| format!("ROI_{j:03}")).collect();
    Cohort::new(names, records)
}
