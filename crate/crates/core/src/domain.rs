//! Domain types shared across the pipeline and the invariant checks on them.
//!
//! All types here are plain data: immutable once built and `Send + Sync`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::region::{Region, RegionArray};

/// Which region a resonator geometry was drawn to accentuate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignKind {
    MSDesign,
    SADesign,
    MADesign,
    SiDesign,
}

impl DesignKind {
    pub const ALL: [DesignKind; 4] = [
        DesignKind::MSDesign,
        DesignKind::SADesign,
        DesignKind::MADesign,
        DesignKind::SiDesign,
    ];

    pub fn accentuated(self) -> Region {
        match self {
            DesignKind::MSDesign => Region::MS,
            DesignKind::SADesign => Region::SA,
            DesignKind::MADesign => Region::MA,
            DesignKind::SiDesign => Region::Si,
        }
    }

    pub fn accentuating(region: Region) -> DesignKind {
        match region {
            Region::MS => DesignKind::MSDesign,
            Region::SA => DesignKind::SADesign,
            Region::MA => DesignKind::MADesign,
            Region::Si => DesignKind::SiDesign,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::MSDesign => "MS design",
            DesignKind::SADesign => "SA design",
            DesignKind::MADesign => "MA design",
            DesignKind::SiDesign => "Si design",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown design `{0}` (expected MS design, SA design, MA design or Si design)")]
pub struct UnknownDesign(pub String);

impl FromStr for DesignKind {
    type Err = UnknownDesign;

    /// Accepts "MS design", "MS Design", "MSDesign", "MS_design" and the
    /// bare region label "MS".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        let stem = compact.strip_suffix("design").unwrap_or(&compact);
        match stem {
            "ms" => Ok(DesignKind::MSDesign),
            "sa" => Ok(DesignKind::SADesign),
            "ma" => Ok(DesignKind::MADesign),
            "si" => Ok(DesignKind::SiDesign),
            _ => Err(UnknownDesign(s.trim().to_string())),
        }
    }
}

impl Serialize for DesignKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DesignKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A resonator geometry fabricated in one material with one process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignId {
    pub design: DesignKind,
    pub material: String,
    pub process: String,
}

impl DesignId {
    pub fn new(design: DesignKind, material: impl Into<String>, process: impl Into<String>) -> Self {
        DesignId {
            design,
            material: material.into(),
            process: process.into(),
        }
    }

    /// Stable textual key, used for seeding and for display.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.design.name(), self.material, self.process)
    }
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, {})", self.design, self.material, self.process)
    }
}

/// Unit of participation values in text files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Percent,
    Fraction,
}

impl Units {
    /// Multiplier taking a stored fraction to this unit.
    pub fn per_fraction(self) -> f64 {
        match self {
            Units::Percent => 100.0,
            Units::Fraction => 1.0,
        }
    }

    pub fn to_fraction(self, v: f64) -> f64 {
        match self {
            Units::Percent => v / 100.0,
            Units::Fraction => v,
        }
    }

    pub fn from_fraction(self, v: f64) -> f64 {
        match self {
            Units::Percent => v * 100.0,
            Units::Fraction => v,
        }
    }

    /// Power of ten taking a value in this unit to a fraction.
    fn exponent(self) -> i32 {
        match self {
            Units::Percent => -2,
            Units::Fraction => 0,
        }
    }

    /// Parses decimal text in this unit straight to the nearest fraction,
    /// shifting the decimal exponent instead of dividing, so `80.5158`
    /// percent reads as the double nearest to 0.805158.
    pub fn parse_fraction(self, text: &str) -> Result<f64, std::num::ParseFloatError> {
        let text = text.trim();
        let v: f64 = text.parse()?;
        if self.exponent() == 0 || !v.is_finite() {
            return Ok(v);
        }
        let (mantissa, exp) = match text.find(['e', 'E']) {
            Some(i) => (&text[..i], text[i + 1..].parse::<i32>().unwrap_or(0)),
            None => (text, 0),
        };
        format!("{mantissa}e{}", exp.saturating_add(self.exponent())).parse()
    }

    /// Shortest decimal text in this unit that [`Units::parse_fraction`]
    /// reads back to exactly `v`.
    pub fn format_fraction(self, v: f64) -> String {
        if self.exponent() == 0 || !v.is_finite() || v == 0.0 {
            return self.from_fraction(v).to_string();
        }
        shift_decimal(&format!("{v:e}"), -self.exponent())
    }
}

/// Rewrites Rust's `{:e}` output (`-1.25e-3`) as plain decimal text of the
/// value times `10^shift`.
fn shift_decimal(sci: &str, shift: i32) -> String {
    let (sign, body) = match sci.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", sci),
    };
    let (mantissa, exp) = body.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = 1 + exp + shift;
    let len = digits.len() as i32;
    let text = if point <= 0 {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    } else if point >= len {
        format!("{digits}{}", "0".repeat((point - len) as usize))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{text}")
}

impl FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "percent" | "%" => Ok(Units::Percent),
            "fraction" => Ok(Units::Fraction),
            other => Err(format!("unknown units `{other}` (expected percent or fraction)")),
        }
    }
}

/// Designs × regions table of participation fractions.
///
/// Construction does not validate; call [`ParticipationMatrix::validate`]
/// or use [`ParticipationMatrix::try_new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationMatrix {
    rows: Vec<DesignId>,
    values: Vec<RegionArray<f64>>,
}

/// Rule broken by a participation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixRule {
    Empty,
    NonFinite,
    NegativeEntry,
    RowSumExceedsOne,
    DuplicateDesign,
}

impl fmt::Display for MatrixRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixRule::Empty => "matrix has no rows",
            MatrixRule::NonFinite => "non-finite entry",
            MatrixRule::NegativeEntry => "negative entry",
            MatrixRule::RowSumExceedsOne => "row sum exceeds 1",
            MatrixRule::DuplicateDesign => "duplicate design",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: MatrixRule,
    pub row: Option<usize>,
    pub design: Option<DesignId>,
    pub region: Option<Region>,
    pub value: Option<f64>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule)?;
        if let (Some(row), Some(design)) = (self.row, &self.design) {
            write!(f, " at row {} [{}]", row + 1, design)?;
        }
        if let Some(region) = self.region {
            write!(f, ", column {region}")?;
        }
        if let Some(v) = self.value {
            write!(f, " (value {v})")?;
        }
        Ok(())
    }
}

/// Slack allowed on row sums so tables that add to exactly 100% in percent
/// survive the percent → fraction division.
const ROW_SUM_SLACK: f64 = 1e-12;

impl ParticipationMatrix {
    pub fn new(rows: Vec<DesignId>, values: Vec<RegionArray<f64>>) -> Self {
        assert_eq!(rows.len(), values.len(), "one value row per design");
        ParticipationMatrix { rows, values }
    }

    /// Builds and validates; returns every violation on failure.
    pub fn try_new(
        rows: Vec<DesignId>,
        values: Vec<RegionArray<f64>>,
    ) -> Result<Self, Vec<Violation>> {
        let m = Self::new(rows, values);
        let v = m.validate();
        if v.is_empty() {
            Ok(m)
        } else {
            Err(v)
        }
    }

    /// Lists every broken invariant. Never fails.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.rows.is_empty() {
            out.push(Violation {
                rule: MatrixRule::Empty,
                row: None,
                design: None,
                region: None,
                value: None,
            });
        }
        let mut seen = HashSet::new();
        for (i, (design, row)) in self.rows.iter().zip(&self.values).enumerate() {
            let at = |rule, region, value| Violation {
                rule,
                row: Some(i),
                design: Some(design.clone()),
                region,
                value,
            };
            if !seen.insert(design) {
                out.push(at(MatrixRule::DuplicateDesign, None, None));
            }
            let mut finite = true;
            for (r, &v) in row.iter() {
                if !v.is_finite() {
                    finite = false;
                    out.push(at(MatrixRule::NonFinite, Some(r), Some(v)));
                } else if v < 0.0 {
                    out.push(at(MatrixRule::NegativeEntry, Some(r), Some(v)));
                }
            }
            let sum = row.sum();
            if finite && sum > 1.0 + ROW_SUM_SLACK {
                out.push(at(MatrixRule::RowSumExceedsOne, None, Some(sum)));
            }
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn designs(&self) -> &[DesignId] {
        &self.rows
    }

    pub fn rows(&self) -> &[RegionArray<f64>] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &RegionArray<f64> {
        &self.values[i]
    }

    pub fn get(&self, design: &DesignId, region: Region) -> Option<f64> {
        self.row_of(design).map(|i| self.values[i][region])
    }

    pub fn row_of(&self, design: &DesignId) -> Option<usize> {
        self.rows.iter().position(|d| d == design)
    }

    /// First row whose geometry accentuates `region`.
    pub fn accentuating_row(&self, region: Region) -> Option<usize> {
        let kind = DesignKind::accentuating(region);
        self.rows.iter().position(|d| d.design == kind)
    }

    pub fn column(&self, region: Region) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |row| row[region])
    }

    /// Copy with region `r`'s column multiplied by `factor`.
    pub fn with_scaled_column(&self, region: Region, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.values {
            row[region] *= factor;
        }
        out
    }

    /// Copy with rows reordered so that row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        ParticipationMatrix {
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
            values: order.iter().map(|&i| self.values[i]).collect(),
        }
    }
}

/// Why a measurement record cannot be used as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordIssue {
    NonPositiveQ,
    NonFiniteQ,
    HighPowerBelowLowPower,
    NoPowerDependence,
}

impl fmt::Display for RecordIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordIssue::NonPositiveQ => "non-positive Q",
            RecordIssue::NonFiniteQ => "non-finite Q_LP",
            RecordIssue::HighPowerBelowLowPower => "Q_HP < Q_LP",
            RecordIssue::NoPowerDependence => "Q_HP = Q_LP",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum RecordStatus {
    Valid,
    /// Physically suspicious but well-formed (no TLS saturation).
    Flagged(RecordIssue),
    /// Not a usable quality factor at all.
    Rejected(RecordIssue),
}

impl RecordStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, RecordStatus::Valid)
    }
}

/// Low- and high-power internal quality factors of one resonator.
/// `q_hp` may be `f64::INFINITY` to mean "no measurable power dependence".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorMeasurement {
    pub design: DesignId,
    pub resonator_id: String,
    pub q_lp: f64,
    pub q_hp: f64,
}

impl ResonatorMeasurement {
    pub fn status(&self) -> RecordStatus {
        let (lp, hp) = (self.q_lp, self.q_hp);
        if lp.is_nan() || hp.is_nan() || !(lp > 0.0) || !(hp > 0.0) {
            RecordStatus::Rejected(RecordIssue::NonPositiveQ)
        } else if lp.is_infinite() {
            RecordStatus::Rejected(RecordIssue::NonFiniteQ)
        } else if hp < lp {
            RecordStatus::Flagged(RecordIssue::HighPowerBelowLowPower)
        } else if hp == lp {
            RecordStatus::Flagged(RecordIssue::NoPowerDependence)
        } else {
            RecordStatus::Valid
        }
    }
}

/// Per-design mean TLS-limited quality factor and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub design: DesignId,
    pub mean_q_tls: f64,
    pub std_err_q_tls: f64,
    pub n_resonators: usize,
}

/// Extracted loss tangent of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTangentEstimate {
    pub region: Region,
    pub mean: f64,
    pub std: f64,
    pub resolvable: bool,
    pub upper_bound: Option<f64>,
}

/// When an extracted tangent counts as resolved.
///
/// A tangent is unresolvable when `mean - sigma_multiple * std < 0`, when
/// `std_exceeds_mean` is set and `std > mean`, or when `mean` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvabilityRule {
    pub sigma_multiple: f64,
    pub std_exceeds_mean: bool,
}

impl Default for ResolvabilityRule {
    fn default() -> Self {
        ResolvabilityRule {
            sigma_multiple: 2.0,
            std_exceeds_mean: true,
        }
    }
}

/// How other regions' minimum contributions enter an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    /// `max(0, mean - 2 std)` per other region.
    #[default]
    ClampedMinima,
    /// `mean - 2 std` as is, possibly negative.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub n_samples: usize,
    pub rng_seed: u64,
    pub participation_units: Units,
    pub resolvability_rule: ResolvabilityRule,
    pub bound_method: BoundMethod,
    /// Loss-factor → loss-tangent multiplier per region, applied after solving.
    pub region_scale: RegionArray<f64>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            n_samples: 10_000,
            rng_seed: 0,
            participation_units: Units::Percent,
            resolvability_rule: ResolvabilityRule::default(),
            bound_method: BoundMethod::default(),
            region_scale: RegionArray::splat(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("region_scale for {0} must be positive and finite, got {1}")]
    BadScale(Region, f64),
    #[error("resolvability sigma multiple must be non-negative and finite, got {0}")]
    BadSigmaMultiple(f64),
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_samples == 0 {
            return Err(ConfigError::NoSamples);
        }
        for (r, &s) in self.region_scale.iter() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError::BadScale(r, s));
            }
        }
        let k = self.resolvability_rule.sigma_multiple;
        if !(k >= 0.0 && k.is_finite()) {
            return Err(ConfigError::BadSigmaMultiple(k));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_text_conversion_is_exact() {
        assert_eq!(Units::Percent.parse_fraction("80.5158").unwrap(), 0.805158);
        assert_eq!(Units::Percent.parse_fraction("1.5E1").unwrap(), 0.15);
        assert_eq!(Units::Percent.parse_fraction("0").unwrap(), 0.0);
        assert_eq!(Units::Fraction.parse_fraction("0.25").unwrap(), 0.25);
        assert!(Units::Percent.parse_fraction("x").is_err());
        assert_eq!(Units::Percent.format_fraction(0.805158), "80.5158");
        assert_eq!(Units::Percent.format_fraction(0.00014), "0.014");
        assert_eq!(Units::Percent.format_fraction(1.0), "100");
        assert_eq!(Units::Percent.format_fraction(0.0), "0");
        for v in [0.04782386251986696, 1e-300, 0.1, 0.3, 2.5e-7, 0.999_999_999_999_999_9] {
            let text = Units::Percent.format_fraction(v);
            assert_eq!(Units::Percent.parse_fraction(&text).unwrap(), v, "{text}");
        }
    }

    fn id(kind: DesignKind) -> DesignId {
        DesignId::new(kind, "TiN", "none")
    }

    fn matrix(values: Vec<[f64; 4]>) -> ParticipationMatrix {
        let rows = DesignKind::ALL.iter().take(values.len()).map(|&k| id(k)).collect();
        ParticipationMatrix::new(rows, values.into_iter().map(RegionArray).collect())
    }

    #[test]
    fn design_names_parse() {
        for k in DesignKind::ALL {
            assert_eq!(k.name().parse::<DesignKind>().unwrap(), k);
        }
        assert_eq!("MS Design".parse::<DesignKind>().unwrap(), DesignKind::MSDesign);
        assert_eq!("SiDesign".parse::<DesignKind>().unwrap(), DesignKind::SiDesign);
        assert_eq!("ma".parse::<DesignKind>().unwrap(), DesignKind::MADesign);
        assert!("XY design".parse::<DesignKind>().is_err());
    }

    #[test]
    fn valid_matrix_has_no_violations() {
        let m = matrix(vec![[0.0027, 0.0015, 0.0002, 0.86]; 4]);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn zero_matrix_is_valid() {
        assert!(matrix(vec![[0.0; 4]; 4]).validate().is_empty());
    }

    #[test]
    fn negative_entry_reported_once() {
        let mut rows = vec![[0.0027, 0.0015, 0.0002, 0.86]; 4];
        rows[0][1] = -0.001;
        let v = matrix(rows).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, MatrixRule::NegativeEntry);
        assert_eq!(v[0].row, Some(0));
        assert_eq!(v[0].region, Some(Region::SA));
        assert!(v[0].to_string().contains("negative entry"));
    }

    #[test]
    fn row_sum_over_one_reported() {
        let mut rows = vec![[0.1, 0.1, 0.1, 0.1]; 4];
        rows[2] = [0.3, 0.3, 0.3, 0.3];
        let v = matrix(rows).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, MatrixRule::RowSumExceedsOne);
        assert_eq!(v[0].row, Some(2));
        assert!(v[0].to_string().contains("row sum exceeds 1"));
    }

    #[test]
    fn empty_and_duplicate_and_nonfinite() {
        let empty = ParticipationMatrix::new(vec![], vec![]);
        assert_eq!(empty.validate()[0].rule, MatrixRule::Empty);

        let dup = ParticipationMatrix::new(
            vec![id(DesignKind::MSDesign), id(DesignKind::MSDesign)],
            vec![RegionArray::splat(0.1); 2],
        );
        assert_eq!(dup.validate()[0].rule, MatrixRule::DuplicateDesign);

        let nan = matrix(vec![[f64::NAN, 0.0, 0.0, 0.0]]);
        assert_eq!(nan.validate()[0].rule, MatrixRule::NonFinite);
    }

    #[test]
    fn record_status() {
        let rec = |lp, hp| ResonatorMeasurement {
            design: id(DesignKind::SADesign),
            resonator_id: "r07".into(),
            q_lp: lp,
            q_hp: hp,
        };
        assert_eq!(rec(8.0e5, 2.0e6).status(), RecordStatus::Valid);
        assert_eq!(rec(8.0e5, f64::INFINITY).status(), RecordStatus::Valid);
        assert_eq!(rec(0.0, 1e6).status(), RecordStatus::Rejected(RecordIssue::NonPositiveQ));
        assert_eq!(rec(1e6, -1.0).status(), RecordStatus::Rejected(RecordIssue::NonPositiveQ));
        assert_eq!(
            rec(2e6, 1e6).status(),
            RecordStatus::Flagged(RecordIssue::HighPowerBelowLowPower)
        );
        assert_eq!(rec(1e6, 1e6).status(), RecordStatus::Flagged(RecordIssue::NoPowerDependence));
        assert_eq!(RecordIssue::HighPowerBelowLowPower.to_string(), "Q_HP < Q_LP");
        assert_eq!(RecordIssue::NonPositiveQ.to_string(), "non-positive Q");
    }

    #[test]
    fn config_validation() {
        let mut c = ExtractionConfig::default();
        assert_eq!(c.n_samples, 10_000);
        assert!(c.validate().is_ok());
        c.n_samples = 0;
        assert_eq!(c.validate(), Err(ConfigError::NoSamples));
        c.n_samples = 1;
        c.region_scale[Region::MA] = 0.0;
        assert!(matches!(c.validate(), Err(ConfigError::BadScale(Region::MA, _))));
    }
}
