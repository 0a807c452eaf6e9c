//! Bundled reference data: the participation matrices of the four device
//! sets and their published loss tangents.

use std::fmt;
use std::str::FromStr;

use crate::domain::{ParticipationMatrix, Units};
use crate::region::{Region, RegionArray};

/// One of the four published device sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceSet {
    TiN,
    TiNHf,
    Al,
    AlHf,
}

/// A published loss tangent: either resolved or only bounded from above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PublishedTangent {
    Resolved { mean: f64, std: f64 },
    Below(f64),
}

impl PublishedTangent {
    /// Representative value: the mean, or the bound when only a bound was
    /// published.
    pub fn value(self) -> f64 {
        match self {
            PublishedTangent::Resolved { mean, .. } => mean,
            PublishedTangent::Below(b) => b,
        }
    }

    pub fn is_resolved(self) -> bool {
        matches!(self, PublishedTangent::Resolved { .. })
    }
}

use PublishedTangent::{Below, Resolved};

const fn r(mean: f64, std: f64) -> PublishedTangent {
    Resolved { mean, std }
}

impl ReferenceSet {
    pub const ALL: [ReferenceSet; 4] = [
        ReferenceSet::TiN,
        ReferenceSet::TiNHf,
        ReferenceSet::Al,
        ReferenceSet::AlHf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReferenceSet::TiN => "TiN",
            ReferenceSet::TiNHf => "TiN w/HF",
            ReferenceSet::Al => "Al",
            ReferenceSet::AlHf => "Al w/HF",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ReferenceSet::TiN => "tin",
            ReferenceSet::TiNHf => "tin-hf",
            ReferenceSet::Al => "al",
            ReferenceSet::AlHf => "al-hf",
        }
    }

    /// Matrix CSV in percent, as tabulated.
    pub fn matrix_csv(self) -> &'static str {
        match self {
            ReferenceSet::TiN => include_str!("../../data/table_s1_tin.csv"),
            ReferenceSet::Al => include_str!("../../data/table_s2_al.csv"),
            ReferenceSet::TiNHf => include_str!("../../data/table_s3_tin_hf.csv"),
            ReferenceSet::AlHf => include_str!("../../data/table_s4_al_hf.csv"),
        }
    }

    pub fn matrix(self) -> ParticipationMatrix {
        super::parse_participation(self.matrix_csv(), Units::Percent)
            .expect("bundled matrices are valid")
    }

    pub fn published_tangents(self) -> RegionArray<PublishedTangent> {
        RegionArray(match self {
            ReferenceSet::TiN => [r(4.6e-4, 2.4e-4), r(1.7e-3, 0.4e-3), r(3.3e-3, 0.4e-3), r(2.6e-7, 0.4e-7)],
            ReferenceSet::TiNHf => [r(2.7e-4, 3.0e-4), Below(1.2e-3), r(3.5e-3, 1.2e-3), r(2.8e-7, 0.6e-7)],
            ReferenceSet::Al => [Below(3.2e-4), Below(2.9e-3), r(29.4e-3, 2.9e-3), r(2.6e-7, 0.8e-7)],
            ReferenceSet::AlHf => [Below(1.3e-4), Below(3.5e-3), r(32.7e-3, 3.6e-3), r(1.3e-7, 1.7e-7)],
        })
    }

    /// Tangent vector used as ground truth for synthetic data: published
    /// means, with bounded regions set to their bound.
    pub fn ground_truth(self) -> RegionArray<f64> {
        self.published_tangents().map(|_, t| t.value())
    }

    /// Regions whose published value is a resolved mean.
    pub fn resolved_regions(self) -> Vec<Region> {
        self.published_tangents()
            .iter()
            .filter(|(_, t)| t.is_resolved())
            .map(|(r, _)| r)
            .collect()
    }
}

impl fmt::Display for ReferenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReferenceSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match key.as_str() {
            "tin" => Ok(ReferenceSet::TiN),
            "tinhf" | "tinwhf" => Ok(ReferenceSet::TiNHf),
            "al" => Ok(ReferenceSet::Al),
            "alhf" | "alwhf" => Ok(ReferenceSet::AlHf),
            _ => Err(format!("unknown reference set `{s}` (tin, tin-hf, al, al-hf)")),
        }
    }
}
