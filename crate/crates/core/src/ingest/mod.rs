//! Text formats: participation-matrix CSV, measurement CSV, the JSON
//! dataset envelope and the results JSON.
//!
//! Matrix CSV header: `design,material,process,MS,SA,MA,Si` (region columns
//! in any order, values in percent unless told otherwise).
//! Measurement CSV header: `design,material,process,resonator_id,q_lp,q_hp`.
//! Unknown columns are errors.

pub mod reference;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{
    DesignId, DesignKind, ExtractionConfig, LossTangentEstimate, ParticipationMatrix,
    RecordStatus, ResonatorMeasurement, Units, Violation,
};
use crate::region::{Region, RegionArray};

const DESIGN_COLUMNS: [&str; 3] = ["design", "material", "process"];
const MEASUREMENT_COLUMNS: [&str; 6] = ["design", "material", "process", "resonator_id", "q_lp", "q_hp"];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}, column {column} ({field}): cannot parse `{value}`: {reason}")]
    Parse {
        line: u64,
        column: usize,
        field: String,
        value: String,
        reason: String,
    },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("unknown region column `{0}` (expected MS, SA, MA, Si)")]
    UnknownRegion(String),
    #[error("unexpected column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("participation matrix invalid: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("measurement for {0} has no row in the participation matrix")]
    DesignNotInMatrix(DesignId),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no estimates to write")]
    NoEstimates,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl IngestError {
    /// True for malformed input as opposed to well-formed input that breaks
    /// a domain rule.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            IngestError::Csv(_)
                | IngestError::Parse { .. }
                | IngestError::MissingColumn(_)
                | IngestError::UnknownRegion(_)
                | IngestError::UnknownColumn(_)
                | IngestError::DuplicateColumn(_)
                | IngestError::Json(_)
        )
    }
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), IngestError> {
    fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn parse_error(record: &csv::StringRecord, column: usize, field: &str, reason: impl fmt::Display) -> IngestError {
    IngestError::Parse {
        line: record.position().map_or(0, |p| p.line()),
        column: column + 1,
        field: field.to_string(),
        value: record.get(column).unwrap_or("").to_string(),
        reason: reason.to_string(),
    }
}

fn parse_number(record: &csv::StringRecord, column: usize, field: &str) -> Result<f64, IngestError> {
    let raw = record.get(column).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|e| parse_error(record, column, field, e))
}

fn parse_design(record: &csv::StringRecord, cols: [usize; 3]) -> Result<DesignId, IngestError> {
    let kind: DesignKind = record
        .get(cols[0])
        .unwrap_or("")
        .parse()
        .map_err(|e| parse_error(record, cols[0], "design", e))?;
    let material = record.get(cols[1]).unwrap_or("");
    let process = record.get(cols[2]).unwrap_or("");
    if material.is_empty() {
        return Err(parse_error(record, cols[1], "material", "empty label"));
    }
    if process.is_empty() {
        return Err(parse_error(record, cols[2], "process", "empty label"));
    }
    Ok(DesignId::new(kind, material, process))
}

fn locate(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

fn check_duplicates(headers: &csv::StringRecord) -> Result<(), IngestError> {
    for (i, h) in headers.iter().enumerate() {
        if headers.iter().skip(i + 1).any(|o| o == h) {
            return Err(IngestError::DuplicateColumn(h.to_string()));
        }
    }
    Ok(())
}

/// Parses and validates a matrix CSV; values are converted to fractions.
pub fn parse_participation(text: &str, units: Units) -> Result<ParticipationMatrix, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    check_duplicates(&headers)?;
    let design_cols = [
        locate(&headers, DESIGN_COLUMNS[0])?,
        locate(&headers, DESIGN_COLUMNS[1])?,
        locate(&headers, DESIGN_COLUMNS[2])?,
    ];
    let mut region_cols: [Option<usize>; 4] = [None; 4];
    for (i, h) in headers.iter().enumerate() {
        if DESIGN_COLUMNS.contains(&h) {
            continue;
        }
        let region: Region = h.parse().map_err(|_| IngestError::UnknownRegion(h.to_string()))?;
        region_cols[region.index()] = Some(i);
    }
    let mut cols = [0usize; 4];
    for r in Region::ALL {
        cols[r.index()] =
            region_cols[r.index()].ok_or_else(|| IngestError::MissingColumn(r.label().to_string()))?;
    }

    let mut designs = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        designs.push(parse_design(&record, design_cols)?);
        let mut row = RegionArray::splat(0.0);
        for r in Region::ALL {
            let raw = record.get(cols[r.index()]).unwrap_or("");
            row[r] = units
                .parse_fraction(raw)
                .map_err(|e| parse_error(&record, cols[r.index()], r.label(), e))?;
        }
        values.push(row);
    }
    ParticipationMatrix::try_new(designs, values).map_err(IngestError::Validation)
}

pub fn read_participation(path: impl AsRef<Path>, units: Units) -> Result<ParticipationMatrix, IngestError> {
    parse_participation(&read_text(path.as_ref())?, units)
}

/// Matrix CSV text. Every value is written as the shortest decimal that
/// reads back to the identical fraction in `units`.
pub fn format_participation(matrix: &ParticipationMatrix, units: Units) -> String {
    let mut out = String::from("design,material,process,MS,SA,MA,Si\n");
    for (d, row) in matrix.designs().iter().zip(matrix.rows()) {
        out.push_str(&format!("{},{},{}", d.design, csv_field(&d.material), csv_field(&d.process)));
        for r in Region::ALL {
            out.push(',');
            out.push_str(&units.format_fraction(row[r]));
        }
        out.push('\n');
    }
    out
}

pub fn write_participation(
    path: impl AsRef<Path>,
    matrix: &ParticipationMatrix,
    units: Units,
) -> Result<(), IngestError> {
    write_text(path.as_ref(), &format_participation(matrix, units))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A measurement row together with its usability verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub measurement: ResonatorMeasurement,
    pub status: RecordStatus,
    pub line: u64,
}

/// Parses a measurement CSV. Rows breaking the positivity or saturation
/// rules are returned with a non-valid status rather than dropped.
pub fn parse_measurements(text: &str) -> Result<Vec<MeasurementRecord>, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    check_duplicates(&headers)?;
    for h in headers.iter() {
        if !MEASUREMENT_COLUMNS.contains(&h) {
            return Err(IngestError::UnknownColumn(h.to_string()));
        }
    }
    let idx: Vec<usize> = MEASUREMENT_COLUMNS
        .iter()
        .map(|c| locate(&headers, c))
        .collect::<Result<_, _>>()?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let design = parse_design(&record, [idx[0], idx[1], idx[2]])?;
        let resonator_id = record.get(idx[3]).unwrap_or("").to_string();
        let q_lp = parse_number(&record, idx[4], "q_lp")?;
        let q_hp = parse_number(&record, idx[5], "q_hp")?;
        let measurement = ResonatorMeasurement {
            design,
            resonator_id,
            q_lp,
            q_hp,
        };
        out.push(MeasurementRecord {
            status: measurement.status(),
            line: record.position().map_or(0, |p| p.line()),
            measurement,
        });
    }
    Ok(out)
}

pub fn read_measurements(path: impl AsRef<Path>) -> Result<Vec<MeasurementRecord>, IngestError> {
    parse_measurements(&read_text(path.as_ref())?)
}

pub fn format_measurements(measurements: &[ResonatorMeasurement]) -> String {
    let mut out = MEASUREMENT_COLUMNS.join(",");
    out.push('\n');
    for m in measurements {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.design.design,
            csv_field(&m.design.material),
            csv_field(&m.design.process),
            csv_field(&m.resonator_id),
            m.q_lp,
            m.q_hp
        ));
    }
    out
}

pub fn write_measurements(
    path: impl AsRef<Path>,
    measurements: &[ResonatorMeasurement],
) -> Result<(), IngestError> {
    write_text(path.as_ref(), &format_measurements(measurements))
}

/// Matrix plus measurements plus free-form provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub matrix: ParticipationMatrix,
    pub measurements: Vec<ResonatorMeasurement>,
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(
        matrix: ParticipationMatrix,
        measurements: Vec<ResonatorMeasurement>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, IngestError> {
        let violations = matrix.validate();
        if !violations.is_empty() {
            return Err(IngestError::Validation(violations));
        }
        if let Some(m) = measurements.iter().find(|m| matrix.row_of(&m.design).is_none()) {
            return Err(IngestError::DesignNotInMatrix(m.design.clone()));
        }
        Ok(Dataset {
            matrix,
            measurements,
            metadata,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRowJson {
    #[serde(flatten)]
    design: DesignId,
    #[serde(rename = "MS")]
    ms: f64,
    #[serde(rename = "SA")]
    sa: f64,
    #[serde(rename = "MA")]
    ma: f64,
    #[serde(rename = "Si")]
    si: f64,
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    metadata: BTreeMap<String, String>,
    units: Units,
    matrix: Vec<MatrixRowJson>,
    measurements: Vec<ResonatorMeasurementJson>,
}

/// `q_hp` is written as `null` when infinite (JSON has no infinity).
#[derive(Serialize, Deserialize)]
struct ResonatorMeasurementJson {
    #[serde(flatten)]
    design: DesignId,
    resonator_id: String,
    q_lp: f64,
    q_hp: Option<f64>,
}

pub fn dataset_to_json(dataset: &Dataset) -> String {
    let env = DatasetJson {
        metadata: dataset.metadata.clone(),
        units: Units::Fraction,
        matrix: dataset
            .matrix
            .designs()
            .iter()
            .zip(dataset.matrix.rows())
            .map(|(d, row)| MatrixRowJson {
                design: d.clone(),
                ms: row[Region::MS],
                sa: row[Region::SA],
                ma: row[Region::MA],
                si: row[Region::Si],
            })
            .collect(),
        measurements: dataset
            .measurements
            .iter()
            .map(|m| ResonatorMeasurementJson {
                design: m.design.clone(),
                resonator_id: m.resonator_id.clone(),
                q_lp: m.q_lp,
                q_hp: m.q_hp.is_finite().then_some(m.q_hp),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&env).expect("dataset serializes")
}

pub fn dataset_from_json(text: &str) -> Result<Dataset, IngestError> {
    let env: DatasetJson = serde_json::from_str(text)?;
    let units = env.units;
    let (designs, values) = env
        .matrix
        .into_iter()
        .map(|r| {
            let row = RegionArray([r.ms, r.sa, r.ma, r.si]).map(|_, &v| units.to_fraction(v));
            (r.design, row)
        })
        .unzip();
    let measurements = env
        .measurements
        .into_iter()
        .map(|m| ResonatorMeasurement {
            design: m.design,
            resonator_id: m.resonator_id,
            q_lp: m.q_lp,
            q_hp: m.q_hp.unwrap_or(f64::INFINITY),
        })
        .collect();
    Dataset::new(ParticipationMatrix::new(designs, values), measurements, env.metadata)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    dataset_from_json(&read_text(path.as_ref())?)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(), IngestError> {
    write_text(path.as_ref(), &dataset_to_json(dataset))
}

/// Contents of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config: ExtractionConfig,
    pub estimates: Vec<LossTangentEstimate>,
    pub generated_by: String,
}

pub fn results_json(
    estimates: &[LossTangentEstimate],
    provenance: &ExtractionConfig,
) -> Result<String, IngestError> {
    if estimates.is_empty() {
        return Err(IngestError::NoEstimates);
    }
    let file = ResultsFile {
        config: provenance.clone(),
        estimates: estimates.to_vec(),
        generated_by: crate::GENERATED_BY.to_string(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

/// Writes estimates and the configuration that produced them.
pub fn write_estimates(
    path: impl AsRef<Path>,
    estimates: &[LossTangentEstimate],
    provenance: &ExtractionConfig,
) -> Result<(), IngestError> {
    write_text(path.as_ref(), &results_json(estimates, provenance)?)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultsFile, IngestError> {
    Ok(serde_json::from_str(&read_text(path.as_ref())?)?)
}
