//! Batch front end: parses a run configuration, dispatches to the library,
//! and writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 operation error (serialized as a JSON report on
//! stdout), 2 usage, 3 validation, 4 I/O. Identical invocations (including
//! seeds) produce byte-identical outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gwp::baselines::{fit_moments, nb_limit_curve, poisson_limit_curve};
use gwp::dist::GwdParams;
use gwp::io;
use gwp::marked::{simulate_marked_counts, MarkedGrid};
use gwp::process::{
    empirical_summary, ergodicity_diagnostic, orderliness_ratio, orderliness_small_volume_limit,
    simulate_counts_conditional, simulate_counts_cox, simulate_points, Backend, CountField,
    QuadratGrid, Window,
};
use gwp::stream::replicate_rng;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "gwp",
    version,
    about = "Generalized Waring point process toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count-distribution tables, moments, and draws.
    #[command(subcommand)]
    Dist(DistCmd),
    /// Quadrat-count fields and point patterns.
    #[command(subcommand)]
    Process(ProcessCmd),
    /// Marked count fields.
    #[command(subcommand)]
    Marks(MarksCmd),
    /// Convergence curves towards the negative binomial and Poisson regimes.
    #[command(subcommand)]
    Limits(LimitsCmd),
    /// Moment-based parameter estimation from a count sample.
    Fit(FitArgs),
    /// Orderliness, ergodicity, and dispersion diagnostics.
    #[command(subcommand)]
    Diagnose(DiagnoseCmd),
}

#[derive(Subcommand)]
enum DistCmd {
    /// Pmf table over 0..=max-n.
    Pmf(DistPmfArgs),
    /// Mean, variance, and descending factorial moments.
    Moments(DistMomentsArgs),
    /// Independent draws, one count per line.
    Sample(DistSampleArgs),
}

#[derive(Subcommand)]
enum ProcessCmd {
    /// Per-cell counts on a quadrat grid, one file per replicate.
    Simulate(ProcessSimulateArgs),
    /// Point patterns via the fine-grid placement recipe.
    Points(ProcessPointsArgs),
}

#[derive(Subcommand)]
enum MarksCmd {
    /// Jointly simulated (cell, mark) counts, one file per replicate.
    Simulate(MarksSimulateArgs),
}

#[derive(Subcommand)]
enum LimitsCmd {
    /// Total-variation distance to the negative binomial limit along k.
    Nb(LimitsNbArgs),
    /// Total-variation distance from the negative binomial to Poisson along c.
    Poisson(LimitsPoissonArgs),
}

#[derive(Subcommand)]
enum DiagnoseCmd {
    /// Multiple-occupancy ratio over a volume sweep.
    Orderliness(DiagnoseOrderlinessArgs),
    /// Across-replicate distribution of count averages over growing windows.
    Ergodicity(DiagnoseErgodicityArgs),
    /// Empirical mean, variance, and index of dispersion of simulated fields.
    Dispersion(DiagnoseDispersionArgs),
}

#[derive(Args, Serialize)]
struct ShapeArgs {
    /// Left shape parameter (positive).
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    /// Right shape parameter (positive).
    #[arg(long, allow_negative_numbers = true)]
    k: f64,
    /// Tail exponent (positive).
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
}

impl ShapeArgs {
    fn params(&self) -> Result<GwdParams, Failure> {
        GwdParams::new(self.a, self.k, self.rho).map_err(validation)
    }
}

#[derive(Args, Serialize)]
struct GridArgs {
    /// Window corners, lower then upper: x0,y0,..,x1,y1,..
    #[arg(long, allow_hyphen_values = true)]
    window: String,
    /// Cells per axis: n0,n1,..
    #[arg(long)]
    cells: String,
}

impl GridArgs {
    fn window(&self) -> Result<Window, Failure> {
        let coords = parse_f64_list(&self.window, "window")?;
        if coords.len() < 2 || coords.len() % 2 != 0 {
            return Err(Failure::Validation(format!(
                "--window needs an even number of coordinates (lower corner then upper), got {}",
                coords.len()
            )));
        }
        let dim = coords.len() / 2;
        Window::new(&coords[..dim], &coords[dim..]).map_err(validation)
    }

    fn cells(&self) -> Result<Vec<usize>, Failure> {
        let cells: Result<Vec<usize>, _> =
            self.cells.split(',').map(|t| t.trim().parse::<usize>()).collect();
        let cells = cells.map_err(|e| Failure::Validation(format!("--cells: {e}")))?;
        if cells.is_empty() || cells.iter().any(|&c| c == 0) {
            return Err(Failure::Validation(
                "--cells entries must be positive".into(),
            ));
        }
        Ok(cells)
    }

    fn grid(&self) -> Result<QuadratGrid, Failure> {
        QuadratGrid::new(self.window()?, &self.cells()?).map_err(validation)
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BackendArg {
    Cox,
    Conditional,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Cox => Backend::Cox,
            BackendArg::Conditional => Backend::Conditional,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Serialize)]
struct DistPmfArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Largest count in the table.
    #[arg(long)]
    max_n: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DistMomentsArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DistSampleArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Number of draws per replicate.
    #[arg(long)]
    n: usize,
    /// Master seed; replicate r uses the derived stream (seed, r).
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    /// Output directory for sample_r{r}.csv files; stdout when omitted
    /// (single replicate only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ProcessSimulateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output directory for counts_r{r} files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ProcessPointsArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    /// Output directory for points_r{r} files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct MarksSimulateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Number of marks.
    #[arg(long)]
    marks: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output directory for marked_r{r} files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct LimitsNbArgs {
    /// Left shape parameter, held fixed along the curve.
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    /// Mean control: the tail exponent is c*k, so the mean stays a*volume/c.
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, allow_negative_numbers = true)]
    volume: f64,
    /// Strictly increasing comma list of k values.
    #[arg(long)]
    k: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct LimitsPoissonArgs {
    /// Intensity of the Poisson target.
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    volume: f64,
    /// Strictly increasing comma list of c values.
    #[arg(long)]
    c: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Count sample, one nonnegative integer per line.
    #[arg(long)]
    input: PathBuf,
    /// Cell volume the sample was observed on.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    volume: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DiagnoseOrderlinessArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Volume sweep: a comma list or a power-of-ten range like 1e-1..1e-8.
    #[arg(long)]
    volumes: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DiagnoseErgodicityArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Strictly increasing volume sweep (comma list or power-of-ten range).
    #[arg(long)]
    volumes: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DiagnoseDispersionArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long, default_value_t = 200)]
    replicates: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures after successful argument parsing, in spec exit-code order.
enum Failure {
    /// In-band operation error, reported as JSON on stdout (exit 1).
    Op(gwp::Error),
    /// Rejected configuration value (exit 3).
    Validation(String),
    /// Filesystem problem (exit 4).
    Io(gwp::Error),
}

fn validation(e: gwp::Error) -> Failure {
    Failure::Validation(e.to_string())
}

/// Classifies library errors raised while running an operation: filesystem
/// variants keep their I/O exit code, everything else is in-band.
fn operation(e: gwp::Error) -> Failure {
    match e {
        gwp::Error::Io { .. } | gwp::Error::Parse { .. } => Failure::Io(e),
        other => Failure::Op(other),
    }
}

fn error_kind(e: &gwp::Error) -> &'static str {
    match e {
        gwp::Error::InvalidParameter { .. } => "invalid_parameter",
        gwp::Error::Domain { .. } => "domain",
        gwp::Error::NonConvergence { .. } => "non_convergence",
        gwp::Error::IterationCap { .. } => "iteration_cap",
        gwp::Error::QuantileOverflow { .. } => "quantile_overflow",
        gwp::Error::InfiniteMoment { .. } => "infinite_moment",
        gwp::Error::DimensionMismatch { .. } => "dimension_mismatch",
        gwp::Error::IndexOutOfRange { .. } => "index_out_of_range",
        gwp::Error::DuplicateIndex { .. } => "duplicate_index",
        gwp::Error::HeterogeneousGrids { .. } => "heterogeneous_grids",
        gwp::Error::InsufficientSample { .. } => "insufficient_sample",
        gwp::Error::DegenerateInput { .. } => "degenerate_input",
        gwp::Error::Io { .. } => "io",
        gwp::Error::Parse { .. } => "parse",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Op(e)) => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "error": { "kind": error_kind(&e), "message": e.to_string() },
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            ExitCode::from(1)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(4)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Dist(DistCmd::Pmf(args)) => dist_pmf(args),
        Command::Dist(DistCmd::Moments(args)) => dist_moments(args),
        Command::Dist(DistCmd::Sample(args)) => dist_sample(args),
        Command::Process(ProcessCmd::Simulate(args)) => process_simulate(args),
        Command::Process(ProcessCmd::Points(args)) => process_points(args),
        Command::Marks(MarksCmd::Simulate(args)) => marks_simulate(args),
        Command::Limits(LimitsCmd::Nb(args)) => limits_nb(args),
        Command::Limits(LimitsCmd::Poisson(args)) => limits_poisson(args),
        Command::Fit(args) => fit(args),
        Command::Diagnose(DiagnoseCmd::Orderliness(args)) => diagnose_orderliness(args),
        Command::Diagnose(DiagnoseCmd::Ergodicity(args)) => diagnose_ergodicity(args),
        Command::Diagnose(DiagnoseCmd::Dispersion(args)) => diagnose_dispersion(args),
    }
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Failure::Validation(format!("--{flag}: {t:?}: {e}")))
        })
        .collect()
}

fn parse_positive_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let values = parse_f64_list(text, flag)?;
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Failure::Validation(format!(
            "--{flag} entries must be positive and finite"
        )));
    }
    Ok(values)
}

/// A volume sweep: either a comma list, or `A..B` where both endpoints are
/// powers of ten, expanded decade by decade from A towards B inclusive.
fn parse_volume_sweep(text: &str) -> Result<Vec<f64>, Failure> {
    let Some((start, end)) = text.split_once("..") else {
        return parse_positive_list(text, "volumes");
    };
    let bounds = [start, end].map(|t| t.trim().parse::<f64>());
    let (Ok(lo), Ok(hi)) = (bounds[0].clone(), bounds[1].clone()) else {
        return Err(Failure::Validation(format!(
            "--volumes: cannot parse sweep endpoints in {text:?}"
        )));
    };
    if !(lo > 0.0) || !(hi > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(Failure::Validation(
            "--volumes sweep endpoints must be positive and finite".into(),
        ));
    }
    let exponents = [lo, hi].map(f64::log10);
    if exponents.iter().any(|e| (e - e.round()).abs() > 1e-9) {
        return Err(Failure::Validation(
            "--volumes sweep endpoints must be powers of ten, like 1e-1..1e-8".into(),
        ));
    }
    let (e0, e1) = (exponents[0].round() as i32, exponents[1].round() as i32);
    let step = if e1 >= e0 { 1 } else { -1 };
    let mut volumes = Vec::new();
    let mut e = e0;
    loop {
        volumes.push(10f64.powi(e));
        if e == e1 {
            break;
        }
        e += step;
    }
    Ok(volumes)
}

fn require_replicates(replicates: u64) -> Result<(), Failure> {
    if replicates == 0 {
        return Err(Failure::Validation("--replicates must be at least 1".into()));
    }
    Ok(())
}

/// Emits a table: to stdout when no path is given, otherwise to the file
/// plus a JSON sidecar recording the full configuration.
fn emit_table<C: Serialize>(
    text: &str,
    out: Option<&Path>,
    command: &str,
    config: &C,
) -> Result<(), Failure> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            write_text_file(path, text)?;
            let sidecar = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "config": serde_json::to_value(config).expect("config serializes"),
            });
            io::write_json(&sidecar, io::sidecar_path(path)).map_err(Failure::Io)
        }
    }
}

fn write_text_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| {
        Failure::Io(gwp::Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    })
}

fn ensure_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| {
        Failure::Io(gwp::Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    })
}

/// JSON report wrapper shared by the single-record commands.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        None => {
            println!("{}", serde_json::to_string_pretty(value).expect("serializes"));
            Ok(())
        }
        Some(path) => io::write_json(value, path).map_err(Failure::Io),
    }
}

fn dist_pmf(args: DistPmfArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let table = params.pmf_table(args.max_n);
    match args.format {
        Format::Csv => {
            let mut text = String::from("n,pmf\n");
            for (n, p) in table.iter().enumerate() {
                text.push_str(&format!("{n},{p}\n"));
            }
            emit_table(&text, args.out.as_deref(), "dist pmf", &args)
        }
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "config": serde_json::to_value(&args).expect("config serializes"),
                "pmf": table,
            });
            emit_json(&report, args.out.as_deref())
        }
    }
}

#[derive(Serialize)]
struct MomentsReport {
    schema_version: u32,
    a: f64,
    k: f64,
    rho: f64,
    /// None whenever the corresponding moment is infinite.
    mean: Option<f64>,
    variance: Option<f64>,
    /// Descending factorial moments of orders 1..=4.
    factorial_moments: Vec<Option<f64>>,
}

fn finite_or_none(result: gwp::Result<f64>) -> Result<Option<f64>, Failure> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(gwp::Error::InfiniteMoment { .. }) => Ok(None),
        Err(e) => Err(operation(e)),
    }
}

fn dist_moments(args: DistMomentsArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let report = MomentsReport {
        schema_version: SCHEMA_VERSION,
        a: params.a(),
        k: params.k(),
        rho: params.rho(),
        mean: finite_or_none(params.mean())?,
        variance: finite_or_none(params.variance())?,
        factorial_moments: (1..=4)
            .map(|r| finite_or_none(params.factorial_moment(r)))
            .collect::<Result<_, _>>()?,
    };
    match args.format {
        Format::Json => emit_json(&report, args.out.as_deref()),
        Format::Csv => {
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let mut text = String::from("quantity,value\n");
            text.push_str(&format!("mean,{}\n", cell(report.mean)));
            text.push_str(&format!("variance,{}\n", cell(report.variance)));
            for (i, m) in report.factorial_moments.iter().enumerate() {
                text.push_str(&format!("factorial_moment_{},{}\n", i + 1, cell(*m)));
            }
            emit_table(&text, args.out.as_deref(), "dist moments", &args)
        }
    }
}

fn dist_sample(args: DistSampleArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    require_replicates(args.replicates)?;
    if args.n == 0 {
        return Err(Failure::Validation("--n must be at least 1".into()));
    }
    let render = |draws: &[u64]| {
        let mut text = String::new();
        for d in draws {
            text.push_str(&format!("{d}\n"));
        }
        text
    };
    match &args.out {
        None => {
            if args.replicates != 1 {
                return Err(Failure::Validation(
                    "--replicates above 1 needs --out to hold one file per replicate".into(),
                ));
            }
            let mut rng = replicate_rng(args.seed, 0);
            print!("{}", render(&params.sample_n(args.n, &mut rng)));
            Ok(())
        }
        Some(dir) => {
            ensure_dir(dir)?;
            for r in 0..args.replicates {
                let mut rng = replicate_rng(args.seed, r);
                let draws = params.sample_n(args.n, &mut rng);
                let path = dir.join(format!("sample_r{r}.csv"));
                write_text_file(&path, &render(&draws))?;
                let sidecar = json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "dist sample",
                    "config": serde_json::to_value(&args).expect("config serializes"),
                    "replicate": r,
                });
                io::write_json(&sidecar, io::sidecar_path(&path)).map_err(Failure::Io)?;
            }
            Ok(())
        }
    }
}

/// Writes one simulated field per replicate as `counts_r{r}`; CSV format
/// pairs each file with the library sidecar, JSON format stores the whole
/// field (grid, counts, and metadata) in one self-describing file.
fn write_field(field: &CountField, dir: &Path, r: u64, format: Format) -> Result<(), Failure> {
    match format {
        Format::Csv => {
            io::write_count_field(field, dir.join(format!("counts_r{r}.csv"))).map_err(Failure::Io)
        }
        Format::Json => {
            let wrapped = json!({ "schema_version": SCHEMA_VERSION, "count_field": field });
            io::write_json(&wrapped, dir.join(format!("counts_r{r}.json"))).map_err(Failure::Io)
        }
    }
}

fn process_simulate(args: ProcessSimulateArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let grid = args.grid.grid()?;
    require_replicates(args.replicates)?;
    ensure_dir(&args.out)?;
    for r in 0..args.replicates {
        let field = match args.backend.into() {
            Backend::Cox => simulate_counts_cox(&params, &grid, args.seed, r),
            Backend::Conditional => simulate_counts_conditional(&params, &grid, args.seed, r),
        }
        .map_err(operation)?;
        write_field(&field, &args.out, r, args.format)?;
    }
    Ok(())
}

fn process_points(args: ProcessPointsArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let window = args.grid.window()?;
    let resolution = args.grid.cells()?;
    require_replicates(args.replicates)?;
    ensure_dir(&args.out)?;
    for r in 0..args.replicates {
        let pattern =
            simulate_points(&params, &window, &resolution, args.seed, r).map_err(operation)?;
        let path = args.out.join(format!("points_r{r}.csv"));
        io::write_point_pattern(&pattern, &path).map_err(Failure::Io)?;
        let sidecar = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "process points",
            "config": serde_json::to_value(&args).expect("config serializes"),
            "replicate": r,
            "points": pattern.len(),
        });
        io::write_json(&sidecar, io::sidecar_path(&path)).map_err(Failure::Io)?;
    }
    Ok(())
}

fn marks_simulate(args: MarksSimulateArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let grid = args.grid.grid()?;
    let marked_grid = MarkedGrid::new(grid, args.marks).map_err(validation)?;
    require_replicates(args.replicates)?;
    ensure_dir(&args.out)?;
    for r in 0..args.replicates {
        let field = simulate_marked_counts(&params, &marked_grid, args.backend.into(), args.seed, r)
            .map_err(operation)?;
        match args.format {
            Format::Csv => {
                io::write_marked_field(&field, args.out.join(format!("marked_r{r}.csv")))
                    .map_err(Failure::Io)?;
            }
            Format::Json => {
                let wrapped = json!({ "schema_version": SCHEMA_VERSION, "marked_field": field });
                io::write_json(&wrapped, args.out.join(format!("marked_r{r}.json")))
                    .map_err(Failure::Io)?;
            }
        }
    }
    Ok(())
}

fn emit_limit_curve<C: Serialize>(
    points: &[gwp::baselines::LimitPoint],
    format: Format,
    out: Option<&Path>,
    command: &str,
    config: &C,
) -> Result<(), Failure> {
    match format {
        Format::Csv => emit_table(&io::limit_curve_csv(points), out, command, config),
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "config": serde_json::to_value(config).expect("config serializes"),
                "points": points,
            });
            emit_json(&report, out)
        }
    }
}

fn limits_nb(args: LimitsNbArgs) -> Result<(), Failure> {
    let k_values = parse_positive_list(&args.k, "k")?;
    if k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::Validation(
            "--k values must be strictly increasing".into(),
        ));
    }
    let points = nb_limit_curve(args.a, args.c, args.volume, &k_values).map_err(validation)?;
    emit_limit_curve(&points, args.format, args.out.as_deref(), "limits nb", &args)
}

fn limits_poisson(args: LimitsPoissonArgs) -> Result<(), Failure> {
    let c_values = parse_positive_list(&args.c, "c")?;
    if c_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::Validation(
            "--c values must be strictly increasing".into(),
        ));
    }
    let points =
        poisson_limit_curve(args.lambda, args.volume, &c_values).map_err(validation)?;
    emit_limit_curve(&points, args.format, args.out.as_deref(), "limits poisson", &args)
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    if !(args.volume > 0.0) || !args.volume.is_finite() {
        return Err(Failure::Validation("--volume must be positive".into()));
    }
    let counts = io::read_count_samples(&args.input).map_err(operation)?;
    let result = fit_moments(&counts, args.volume).map_err(operation)?;
    match args.format {
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "config": serde_json::to_value(&args).expect("config serializes"),
                "fit": result,
            });
            emit_json(&report, args.out.as_deref())
        }
        Format::Csv => {
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let mut text = String::from("quantity,value\n");
            text.push_str(&format!("a_hat,{}\n", cell(result.a_hat)));
            text.push_str(&format!("k_hat,{}\n", cell(result.k_hat)));
            text.push_str(&format!("rho_hat,{}\n", cell(result.rho_hat)));
            text.push_str(&format!("converged,{}\n", result.converged));
            emit_table(&text, args.out.as_deref(), "fit", &args)
        }
    }
}

fn diagnose_orderliness(args: DiagnoseOrderlinessArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let volumes = parse_volume_sweep(&args.volumes)?;
    let mut rows = Vec::with_capacity(volumes.len());
    for &v in &volumes {
        rows.push((v, orderliness_ratio(&params, v).map_err(operation)?));
    }
    match args.format {
        Format::Csv => {
            let mut text = String::from("volume,ratio\n");
            for (v, ratio) in &rows {
                text.push_str(&format!("{v},{ratio}\n"));
            }
            emit_table(&text, args.out.as_deref(), "diagnose orderliness", &args)
        }
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "config": serde_json::to_value(&args).expect("config serializes"),
                "rows": rows.iter().map(|(v, r)| json!({"volume": v, "ratio": r})).collect::<Vec<_>>(),
                "small_volume_limit": orderliness_small_volume_limit(&params),
            });
            emit_json(&report, args.out.as_deref())
        }
    }
}

fn diagnose_ergodicity(args: DiagnoseErgodicityArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let volumes = parse_volume_sweep(&args.volumes)?;
    if args.replicates < 100 {
        return Err(Failure::Validation(
            "--replicates must be at least 100 for stable rate variances".into(),
        ));
    }
    let table = ergodicity_diagnostic(&params, &volumes, args.replicates, args.seed)
        .map_err(operation)?;
    match args.format {
        Format::Csv => {
            let mut text = String::from("volume,mean_rate,variance_rate,se_mean_rate\n");
            for row in &table.rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    row.volume, row.mean_rate, row.variance_rate, row.se_mean_rate
                ));
            }
            emit_table(&text, args.out.as_deref(), "diagnose ergodicity", &args)
        }
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "config": serde_json::to_value(&args).expect("config serializes"),
                "table": table,
            });
            emit_json(&report, args.out.as_deref())
        }
    }
}

fn diagnose_dispersion(args: DiagnoseDispersionArgs) -> Result<(), Failure> {
    let params = args.shape.params()?;
    let grid = args.grid.grid()?;
    require_replicates(args.replicates)?;
    let mut fields = Vec::with_capacity(args.replicates as usize);
    for r in 0..args.replicates {
        fields.push(
            match args.backend.into() {
                Backend::Cox => simulate_counts_cox(&params, &grid, args.seed, r),
                Backend::Conditional => simulate_counts_conditional(&params, &grid, args.seed, r),
            }
            .map_err(operation)?,
        );
    }
    let summary = empirical_summary(&fields).map_err(operation)?;
    let cell_law = GwdParams::new(
        params.a(),
        params.k() * grid.cell_volume(),
        params.rho(),
    )
    .map_err(operation)?;
    let analytic = match (cell_law.mean(), cell_law.variance()) {
        (Ok(m), Ok(v)) if m > 0.0 => Some(v / m),
        _ => None,
    };
    match args.format {
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "config": serde_json::to_value(&args).expect("config serializes"),
                "summary": summary,
                "analytic_dispersion": analytic,
            });
            emit_json(&report, args.out.as_deref())
        }
        Format::Csv => {
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let mut text = String::from("quantity,value\n");
            text.push_str(&format!("mean,{}\n", summary.mean));
            text.push_str(&format!("mean_se,{}\n", summary.mean_se));
            text.push_str(&format!("variance,{}\n", summary.variance));
            text.push_str(&format!("variance_se,{}\n", summary.variance_se));
            text.push_str(&format!("dispersion,{}\n", cell(summary.dispersion)));
            text.push_str(&format!("dispersion_se,{}\n", cell(summary.dispersion_se)));
            text.push_str(&format!("analytic_dispersion,{}\n", cell(analytic)));
            emit_table(&text, args.out.as_deref(), "diagnose dispersion", &args)
        }
    }
}
