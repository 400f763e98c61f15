//! Named synthetic cohorts used by the examples and the end-to-end checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Attribute, ClassCounts, PerAttribute, SyntheticConfig, SKEW_REFERENCE};

/// Generator seed shared by every preset.
pub const PRESET_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 5000 records, every bias knob at zero.
    Unbiased,
    /// Gender group B shifted towards disease, with 5% adjacent-class label noise.
    Biased,
    /// Reference-level prevalence skew on every attribute, nothing else.
    SkewOnly,
    /// Total brain volume strongly loaded on gender and age.
    ProxyBearing,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Unbiased, Preset::Biased, Preset::SkewOnly, Preset::ProxyBearing];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Unbiased => "unbiased",
            Preset::Biased => "biased",
            Preset::SkewOnly => "skew_only",
            Preset::ProxyBearing => "proxy_bearing",
        }
    }

    pub fn parse(s: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.as_str() == s)
    }

    pub fn config(self) -> SyntheticConfig {
        let balanced = ClassCounts { cn: 2000, mci: 1000, ad: 1000 };
        let base = SyntheticConfig { seed: PRESET_SEED, ..SyntheticConfig::default() };
        match self {
            Preset::Unbiased => SyntheticConfig { n_per_class: ClassCounts { cn: 3572, mci: 714, ad: 714 }, ..base },
            Preset::Biased => {
                let mut shift = PerAttribute::default();
                shift.set(Attribute::Gender, 1.0);
                let mut noise = PerAttribute::default();
                noise.set(Attribute::Gender, 0.05);
                SyntheticConfig { n_per_class: balanced, subgroup_shift: shift, subgroup_label_noise: noise, ..base }
            }
            Preset::SkewOnly => {
                let mut skew = PerAttribute::default();
                for a in Attribute::ALL {
                    skew.set(a, SKEW_REFERENCE);
                }
                SyntheticConfig { n_per_class: balanced, prevalence_skew: skew, ..base }
            }
            Preset::ProxyBearing => SyntheticConfig { proxy_strength: 2.0, ..base },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
