//! Command-line front-end: argument definitions, subcommands and output
//! staging.
//!
//! Every subcommand builds its complete output in memory first and only
//! then writes it, so a failing run never leaves partial files behind.

pub mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use surfloss::bounds::{self, BoundError};
use surfloss::ingest::{self, Dataset, IngestError};
use surfloss::plot;
use surfloss::predict::{self, BudgetReport, BudgetSet, PredictError, PredictReport};
use surfloss::qtls::{self, QtlsError, RecordPolicy};
use surfloss::sle::ExtractError;
use surfloss::synth::{self, HighPowerModel, SynthError, SynthSpec};
use surfloss::{
    BoundMethod, EnsembleStats, ExtractionConfig, ExtractionResult, ParticipationMatrix,
    RecordStatus, ReferenceSet, Region, RegionArray, ResonatorMeasurement, Units,
};

pub const RESULTS_FILE: &str = "results.json";
pub const PREDICT_FILE: &str = "predict.json";
pub const PREDICT_SVG: &str = "predict.svg";
pub const BUDGET_FILE: &str = "budget.json";
pub const BUDGET_SVG: &str = "budget.svg";
pub const BOUND_FILE: &str = "bound.json";
pub const MATRIX_FILE: &str = "matrix.csv";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";

#[derive(Debug, Parser)]
#[command(name = "surfloss", version, about = "Surface-loss extraction for CPW resonators")]
pub struct Cli {
    /// Worker threads for the Monte-Carlo loop (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract per-region loss tangents and write results.json.
    Extract {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Predicted against measured Q_TLS per design.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Dataset label used in the report and figure.
        #[arg(long)]
        label: Option<String>,
    },
    /// Measured loss per design next to its predicted per-region split.
    Budget {
        /// MATRIX MEASUREMENTS LABEL, once per dataset.
        #[arg(long = "set", num_args = 3, value_names = ["MATRIX", "MEASUREMENTS", "LABEL"], required = true)]
        sets: Vec<String>,
        #[arg(long, default_value = "percent")]
        units: Units,
        #[arg(long)]
        strict: bool,
        /// Region drawn inside the measured bars.
        #[arg(long, default_value = "SA")]
        highlight: Region,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Upper bound on one region's tangent from its accentuating design.
    Bound {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        region: Region,
    },
    /// Synthetic measurements from known tangents.
    Synth {
        /// Bundled participation matrix and published tangents (tin, tin-hf, al, al-hf).
        #[arg(long, conflicts_with = "matrix")]
        reference: Option<ReferenceSet>,
        /// Participation matrix CSV (needs --tangents).
        #[arg(long, requires = "tangents")]
        matrix: Option<PathBuf>,
        /// True tangents MS,SA,MA,Si; overrides the reference values.
        #[arg(long, value_delimiter = ',', value_name = "MS,SA,MA,Si")]
        tangents: Option<Vec<f64>>,
        #[arg(long, default_value = "percent")]
        units: Units,
        /// Resonators per design.
        #[arg(long, default_value_t = 30)]
        n: usize,
        /// Relative lognormal noise on Q_TLS.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// High-power Q: a number or `inf`.
        #[arg(long = "q-hp", default_value = "inf")]
        q_hp: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Participation matrix CSV.
    #[arg(long, requires = "measurements", conflicts_with = "dataset")]
    pub matrix: Option<PathBuf>,
    /// Measurements CSV.
    #[arg(long, requires = "matrix")]
    pub measurements: Option<PathBuf>,
    /// JSON dataset with matrix, measurements and metadata.
    #[arg(long, required_unless_present = "matrix")]
    pub dataset: Option<PathBuf>,
    /// Units of the matrix CSV.
    #[arg(long, default_value = "percent")]
    pub units: Units,
    /// Flagged or rejected measurements are an error instead of skipped.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Monte-Carlo samples.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// clamped or literal treatment of other regions' minima in bounds.
    #[arg(long, default_value = "clamped", value_parser = parse_bound_method)]
    pub bound_method: BoundMethod,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG figures.
    #[arg(long)]
    pub svg: bool,
}

fn parse_bound_method(s: &str) -> Result<BoundMethod, String> {
    match s {
        "clamped" | "clamped_minima" => Ok(BoundMethod::ClampedMinima),
        "literal" => Ok(BoundMethod::Literal),
        _ => Err(format!("unknown bound method `{s}` (clamped or literal)")),
    }
}

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Parse(String),
    Validation(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Validation(_) => 5,
            CliError::Solver(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Io(m) => ("I/O", m),
            CliError::Parse(m) => ("parse", m),
            CliError::Validation(m) => ("validation", m),
            CliError::Solver(m) => ("extraction", m),
        };
        write!(f, "{kind} error: {msg}")
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => CliError::Io(e.to_string()),
            e if e.is_parse_error() => CliError::Parse(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<QtlsError> for CliError {
    fn from(e: QtlsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        match e {
            ExtractError::Config(_) => CliError::Usage(e.to_string()),
            ExtractError::MissingStats(_)
            | ExtractError::InvalidStats { .. }
            | ExtractError::InvalidMatrix(_) => CliError::Validation(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::ZeroLoss(_) | SynthError::InvalidMatrix(_) => CliError::Validation(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Console text plus files to write, staged until [`Output::commit`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl Output {
    fn file(&mut self, dir: &Path, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((dir.join(name), contents.into()));
    }

    /// Writes every staged file. Each goes to a temporary sibling first;
    /// the renames happen only after all writes succeeded.
    pub fn commit(&self) -> Result<(), CliError> {
        let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                if let Err(e) = fs::create_dir_all(dir) {
                    cleanup(&staged);
                    return Err(io(dir, e));
                }
            }
            let mut name = path.file_name().unwrap_or_default().to_os_string();
            name.push(".tmp");
            let tmp = path.with_file_name(format!(".{}", name.to_string_lossy()));
            if let Err(e) = fs::write(&tmp, bytes) {
                cleanup(&staged);
                return Err(io(&tmp, e));
            }
            staged.push((tmp, path.clone()));
        }
        for (tmp, path) in &staged {
            if let Err(e) = fs::rename(tmp, path) {
                cleanup(&staged);
                return Err(io(path, e));
            }
        }
        Ok(())
    }
}

/// Parsed matrix and ensembles of one dataset.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub matrix: ParticipationMatrix,
    pub measurements: Vec<ResonatorMeasurement>,
    pub stats: Vec<EnsembleStats>,
    pub label: String,
}

fn default_label(matrix: &ParticipationMatrix) -> String {
    matrix
        .designs()
        .first()
        .map(|d| {
            if d.process == "none" || d.process.is_empty() {
                d.material.clone()
            } else {
                format!("{} w/{}", d.material, d.process)
            }
        })
        .unwrap_or_default()
}

fn policy(strict: bool) -> RecordPolicy {
    if strict {
        RecordPolicy::Strict
    } else {
        RecordPolicy::ExcludeFlagged
    }
}

fn load_csv(matrix: &Path, measurements: &Path, units: Units, strict: bool) -> Result<Loaded, CliError> {
    let m = ingest::read_participation(matrix, units)?;
    let records = ingest::read_measurements(measurements)?;
    for r in &records {
        match &r.status {
            RecordStatus::Valid => {}
            RecordStatus::Flagged(issue) | RecordStatus::Rejected(issue) if !strict => log::warn!(
                "{}:{}: {} {} excluded ({issue})",
                measurements.display(),
                r.line,
                r.measurement.design,
                r.measurement.resonator_id
            ),
            _ => {}
        }
    }
    let measurements: Vec<ResonatorMeasurement> = records.into_iter().map(|r| r.measurement).collect();
    finish_load(Dataset::new(m, measurements, BTreeMap::new())?, strict)
}

fn finish_load(ds: Dataset, strict: bool) -> Result<Loaded, CliError> {
    let stats = qtls::ensemble_table(&ds.measurements, ds.matrix.designs(), policy(strict))?;
    let label = ds
        .metadata
        .get("label")
        .cloned()
        .unwrap_or_else(|| default_label(&ds.matrix));
    Ok(Loaded {
        matrix: ds.matrix,
        measurements: ds.measurements,
        stats,
        label,
    })
}

pub fn load(input: &InputArgs) -> Result<Loaded, CliError> {
    match (&input.dataset, &input.matrix, &input.measurements) {
        (Some(path), None, None) => finish_load(ingest::read_dataset(path)?, input.strict),
        (None, Some(m), Some(q)) => load_csv(m, q, input.units, input.strict),
        _ => Err(CliError::Usage(
            "give either --dataset or both --matrix and --measurements".into(),
        )),
    }
}

fn config(solve: &SolveArgs, units: Units) -> ExtractionConfig {
    ExtractionConfig {
        n_samples: solve.samples,
        rng_seed: solve.seed,
        participation_units: units,
        bound_method: solve.bound_method,
        ..ExtractionConfig::default()
    }
}

fn run_extraction(loaded: &Loaded, cfg: &ExtractionConfig) -> Result<ExtractionResult, CliError> {
    let result = surfloss::extract(&loaded.matrix, &loaded.stats, cfg)?;
    if result.ill_conditioned {
        log::warn!(
            "participation matrix condition number {:.3e}; estimates may be unstable",
            result.condition_diagnostic
        );
    }
    Ok(result)
}

pub fn cmd_extract(input: &InputArgs, solve: &SolveArgs, out: &OutArgs) -> Result<Output, CliError> {
    let loaded = load(input)?;
    let cfg = config(solve, input.units);
    let result = run_extraction(&loaded, &cfg)?;
    let json = ingest::results_json(&result.estimate_list(), &result.config)?;

    let mut o = Output::default();
    o.stdout = table::estimates_table(&loaded.label, &result);
    o.file(&out.out, RESULTS_FILE, json);
    Ok(o)
}

pub fn cmd_predict(
    input: &InputArgs,
    solve: &SolveArgs,
    out: &OutArgs,
    label: Option<&str>,
) -> Result<Output, CliError> {
    let loaded = load(input)?;
    let cfg = config(solve, input.units);
    let result = run_extraction(&loaded, &cfg)?;
    let predicted = predict::predict_q(&loaded.matrix, &result);
    let report = PredictReport::new(
        label.map_or_else(|| loaded.label.clone(), str::to_string),
        predicted,
        loaded.stats.clone(),
    );

    let mut o = Output::default();
    o.stdout = table::predict_table(&report);
    o.file(&out.out, PREDICT_FILE, to_json(&report));
    if out.svg {
        o.file(&out.out, PREDICT_SVG, plot::scatter_svg(std::slice::from_ref(&report)));
    }
    Ok(o)
}

pub fn cmd_budget(
    sets: &[(PathBuf, PathBuf, String)],
    units: Units,
    strict: bool,
    highlight: Region,
    solve: &SolveArgs,
    out: &OutArgs,
) -> Result<Output, CliError> {
    let cfg = config(solve, units);
    let mut datasets = Vec::with_capacity(sets.len());
    for (matrix, measurements, label) in sets {
        let loaded = load_csv(matrix, measurements, units, strict)?;
        let result = run_extraction(&loaded, &cfg)?;
        datasets.push(BudgetSet {
            label: label.clone(),
            budgets: predict::loss_budget(&loaded.matrix, &result, &loaded.stats)?,
        });
    }
    let report = BudgetReport::new(datasets);

    let mut o = Output::default();
    o.stdout = table::budget_table(&report, highlight);
    o.file(&out.out, BUDGET_FILE, to_json(&report));
    if out.svg {
        o.file(&out.out, BUDGET_SVG, plot::budget_svg(&report, highlight));
    }
    Ok(o)
}

#[derive(Debug, Clone, Serialize)]
struct BoundReport {
    generated_by: String,
    region: Region,
    design: surfloss::DesignId,
    resolvable: bool,
    mean: f64,
    std: f64,
    upper_bound: f64,
    config: ExtractionConfig,
}

pub fn cmd_bound(
    input: &InputArgs,
    solve: &SolveArgs,
    out: &OutArgs,
    region: Region,
) -> Result<Output, CliError> {
    let loaded = load(input)?;
    let cfg = config(solve, input.units);
    let result = run_extraction(&loaded, &cfg)?;
    let row = loaded
        .matrix
        .accentuating_row(region)
        .ok_or(BoundError::NoAccentuatingDesign(region))?;
    let scale = &cfg.region_scale;
    let loss_factors = result.estimates.map(|r, e| surfloss::LossTangentEstimate {
        mean: e.mean / scale[r],
        std: e.std / scale[r],
        ..e.clone()
    });
    let bound = bounds::upper_bound(
        &loaded.matrix,
        &loaded.stats[row],
        &loss_factors,
        region,
        cfg.bound_method,
    )? * scale[region];
    let e = &result.estimates[region];
    let report = BoundReport {
        generated_by: surfloss::GENERATED_BY.to_string(),
        region,
        design: loaded.stats[row].design.clone(),
        resolvable: e.resolvable,
        mean: e.mean,
        std: e.std,
        upper_bound: bound,
        config: result.config.clone(),
    };

    let mut o = Output::default();
    o.stdout = table::bound_line(&loaded.label, region, bound, e.resolvable);
    o.file(&out.out, BOUND_FILE, to_json(&report));
    Ok(o)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_synth(
    reference: Option<ReferenceSet>,
    matrix: Option<&Path>,
    tangents: Option<&[f64]>,
    units: Units,
    n: usize,
    noise: f64,
    q_hp: f64,
    seed: u64,
    out: &OutArgs,
) -> Result<Output, CliError> {
    let (m, truth) = match (reference, matrix) {
        (Some(set), None) => (set.matrix(), set.ground_truth()),
        (None, Some(path)) => {
            let m = ingest::read_participation(path, units)?;
            (m, RegionArray::splat(0.0))
        }
        _ => return Err(CliError::Usage("give either --reference or --matrix with --tangents".into())),
    };
    let truth = match tangents {
        Some(t) if t.len() == Region::COUNT => RegionArray([t[0], t[1], t[2], t[3]]),
        Some(t) => {
            return Err(CliError::Usage(format!("--tangents needs 4 values, got {}", t.len())))
        }
        None if matrix.is_some() => return Err(CliError::Usage("--matrix needs --tangents".into())),
        None => truth,
    };
    let q_hp_model = if q_hp.is_infinite() && q_hp > 0.0 {
        HighPowerModel::Infinite
    } else {
        HighPowerModel::Fixed(q_hp)
    };
    let spec = SynthSpec {
        matrix: m,
        true_tangents: truth,
        n_per_design: n,
        relative_noise: noise,
        q_hp_model,
        rng_seed: seed,
    };
    let measurements = synth::generate(&spec)?;

    let mut o = Output::default();
    o.stdout = table::synth_summary(&spec);
    o.file(&out.out, MATRIX_FILE, ingest::format_participation(&spec.matrix, units));
    o.file(&out.out, MEASUREMENTS_FILE, ingest::format_measurements(&measurements));
    Ok(o)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn dispatch(command: &Command) -> Result<Output, CliError> {
    match command {
        Command::Extract { input, solve, out } => cmd_extract(input, solve, out),
        Command::Predict {
            input,
            solve,
            out,
            label,
        } => cmd_predict(input, solve, out, label.as_deref()),
        Command::Budget {
            sets,
            units,
            strict,
            highlight,
            solve,
            out,
        } => {
            let triples: Vec<(PathBuf, PathBuf, String)> = sets
                .chunks(3)
                .map(|c| (PathBuf::from(&c[0]), PathBuf::from(&c[1]), c[2].clone()))
                .collect();
            cmd_budget(&triples, *units, *strict, *highlight, solve, out)
        }
        Command::Bound {
            input,
            solve,
            out,
            region,
        } => cmd_bound(input, solve, out, *region),
        Command::Synth {
            reference,
            matrix,
            tangents,
            units,
            n,
            noise,
            q_hp,
            seed,
            out,
        } => cmd_synth(
            *reference,
            matrix.as_deref(),
            tangents.as_deref(),
            *units,
            *n,
            *noise,
            *q_hp,
            *seed,
            out,
        ),
    }
}

/// Runs a parsed command line, on a dedicated pool when `--threads` is set.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(&cli.command)),
        None => dispatch(&cli.command),
    }
}
