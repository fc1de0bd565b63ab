//! Command-line front end.
//!
//! Every file the tool writes starts with `#` lines echoing the effective
//! configuration, followed by a CSV body. Machine columns carry 17
//! significant digits so values round-trip exactly; `*_fmt` columns are for
//! reading.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::depth::{depth_weights, sample_depths, uniform_weights, WeightVector, DEFAULT_DEPTH_FLOOR};
use crate::error::Error;
use crate::estimating::{EstimatingEquation, Sample};
use crate::inference::{invert_ci, plug_in_estimates, vj_interval, wjel_point_estimate, ConfidenceInterval, Method, Truncation};
use crate::simlab::{reference, run_coverage_experiment, ExperimentReport, Family, SimDesign, Target};
use crate::wjel::SolverConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("row {row}: column '{column}' has non-numeric value '{value}'")]
    ParseError { row: usize, column: String, value: String },
    #[error("{0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{0} replication(s) failed; see the failures column")]
    Failures(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::FileNotFound(_) | CliError::MissingColumn(_) | CliError::ParseError { .. } | CliError::Csv(_) => {
                EXIT_DATA
            }
            CliError::Io(_) => EXIT_DATA,
            CliError::Failures(_) => EXIT_NUMERICAL,
            CliError::Core(e) => match e {
                Error::Config(_) => EXIT_CONFIG,
                Error::DimensionMismatch { .. } | Error::InsufficientData { .. } | Error::NonFinite(_) => EXIT_DATA,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "depth-jel", version, about = "Depth-weighted jackknife empirical likelihood for Gini parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimates (plug-in and likelihood minimiser).
    Estimate(DataArgs),
    /// Confidence intervals for one equation under several methods.
    Ci(CiArgs),
    /// Monte Carlo coverage experiment from a design file.
    Experiment(ExperimentArgs),
    /// Spatial depths and the resulting observation weights.
    DepthWeights(DataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EquationKind {
    #[value(name = "gini-corr-1")]
    GiniCorr1,
    #[value(name = "gini-corr-2")]
    GiniCorr2,
    GiniIndex,
}

impl EquationKind {
    fn target(self) -> Target {
        match self {
            EquationKind::GiniCorr1 => Target::Gamma1,
            EquationKind::GiniCorr2 => Target::Gamma2,
            EquationKind::GiniIndex => Target::GiniIndex,
        }
    }

    fn name(self) -> &'static str {
        match self {
            EquationKind::GiniCorr1 => "gini-corr-1",
            EquationKind::GiniCorr2 => "gini-corr-2",
            EquationKind::GiniIndex => "gini-index",
        }
    }

    fn columns_needed(self) -> usize {
        if self == EquationKind::GiniIndex {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsKind {
    Uniform,
    SpatialDepth,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column names, comma-separated (`x,y` for correlations, `x` for the index).
    #[arg(long, value_delimiter = ',', required = true)]
    pub columns: Vec<String>,
    #[arg(long, value_enum, default_value = "gini-corr-1")]
    pub equation: EquationKind,
    #[arg(long, value_enum, default_value = "spatial-depth")]
    pub weights: WeightsKind,
    /// Accepted for interface uniformity; these commands draw no random numbers.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "jel,wjel,vj")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Design file with `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the design's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Overrides the design's methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads the named columns of a CSV file as a sample, in file order.
pub fn ingest_csv(path: &Path, columns: &[String]) -> CliResult<Sample> {
    if !path.exists() {
        return Err(CliError::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = reader.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| CliError::MissingColumn(c.clone()))
        })
        .collect::<CliResult<_>>()?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        for (&j, name) in idx.iter().zip(columns) {
            let cell = record.get(j).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(CliError::ParseError {
                        row: i + 1,
                        column: name.clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
    }
    Ok(Sample::new(columns.len(), values)?)
}

/// `x` with 17 significant digits; parses back to the same `f64`.
pub fn full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// `x` rounded to `digits` significant digits in positional notation.
pub fn significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn truncation_label(t: Truncation) -> &'static str {
    match t {
        Truncation::None => "none",
        Truncation::Hull => "hull",
        Truncation::Bound => "bound",
    }
}

fn parse_methods(raw: &[String]) -> CliResult<Vec<Method>> {
    let methods: Vec<Method> = raw
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse().map_err(|e: Error| CliError::Config(e.to_string())))
        .collect::<CliResult<_>>()?;
    if methods.is_empty() {
        return Err(CliError::Config("no methods selected".into()));
    }
    Ok(methods)
}

fn load(args: &DataArgs) -> CliResult<Sample> {
    let need = args.equation.columns_needed();
    if args.columns.len() != need {
        return Err(CliError::Config(format!(
            "equation {} needs {need} column(s), got {}",
            args.equation.name(),
            args.columns.len()
        )));
    }
    ingest_csv(&args.input, &args.columns)
}

fn weights_for(kind: WeightsKind, sample: &Sample) -> CliResult<WeightVector> {
    Ok(match kind {
        WeightsKind::Uniform => uniform_weights(sample.len()),
        WeightsKind::SpatialDepth => depth_weights(sample, DEFAULT_DEPTH_FLOOR)?,
    })
}

fn data_echo(command: &str, args: &DataArgs) -> Vec<String> {
    vec![
        format!("command = {command}"),
        format!("input = {}", args.input.display()),
        format!("columns = {}", args.columns.join(",")),
        format!("equation = {}", args.equation.name()),
        format!("weights = {}", match args.weights {
            WeightsKind::Uniform => "uniform",
            WeightsKind::SpatialDepth => "spatial-depth",
        }),
    ]
}

fn emit(out: Option<&Path>, echo: &[String], body: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
    let mut text = Vec::new();
    for line in echo {
        writeln!(text, "# {line}")?;
    }
    text.extend_from_slice(body);
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(&text)?,
    }
    Ok(())
}

fn csv_body(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut s = line(header.to_vec());
    s.push('\n');
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
        s.push('\n');
    }
    s
}

/// Point estimates for `--equation`: the plug-in root and the minimiser of
/// the (weighted) likelihood ratio.
pub fn cmd_estimate(args: &DataArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let sample = load(args)?;
    let eq = args.equation.target().equation();
    let plug_in = plug_in_estimates(eq.as_ref(), &sample)?[0];
    let w = weights_for(args.weights, &sample)?;
    let minimiser = wjel_point_estimate(eq.as_ref(), &sample, &w, &SolverConfig::default())?[0];
    let header = ["equation", "n", "plug_in", "el_minimiser", "plug_in_fmt", "el_minimiser_fmt"];
    let rows = vec![vec![
        args.equation.name().to_string(),
        sample.len().to_string(),
        full(plug_in),
        full(minimiser),
        significant(plug_in, 7),
        significant(minimiser, 7),
    ]];
    if args.out.is_some() {
        write!(stdout, "{}", render_table(&header, &rows))?;
    }
    emit(args.out.as_deref(), &data_echo("estimate", args), &csv_body(&header, &rows)?, stdout)
}

fn ci_for(method: Method, eq: &dyn EstimatingEquation, sample: &Sample, level: f64) -> CliResult<ConfidenceInterval> {
    let cfg = SolverConfig::default();
    let ci = match method {
        Method::Vj => vj_interval(eq, sample, level)?,
        Method::Jel => invert_ci(eq, sample, &uniform_weights(sample.len()), level, &cfg)?,
        Method::Wjel => {
            let mut ci = invert_ci(eq, sample, &depth_weights(sample, DEFAULT_DEPTH_FLOOR)?, level, &cfg)?;
            ci.method = Method::Wjel;
            ci
        }
    };
    Ok(ci)
}

/// One record per method: estimate, interval, length and truncation flags.
pub fn cmd_ci(args: &CiArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Config(format!("level {} outside (0, 1)", args.level)));
    }
    let methods = parse_methods(&args.methods)?;
    let sample = load(&args.data)?;
    let eq = args.data.equation.target().equation();
    let header = [
        "equation",
        "method",
        "estimate",
        "lower",
        "upper",
        "length",
        "estimate_fmt",
        "interval_fmt",
        "lower_truncation",
        "upper_truncation",
    ];
    let mut rows = Vec::new();
    for &m in &methods {
        let ci = ci_for(m, eq.as_ref(), &sample, args.level)?;
        rows.push(vec![
            args.data.equation.name().to_string(),
            m.as_str().to_string(),
            full(ci.point_estimate),
            full(ci.lower),
            full(ci.upper),
            full(ci.length()),
            significant(ci.point_estimate, 7),
            format!("({}, {})", significant(ci.lower, 7), significant(ci.upper, 7)),
            truncation_label(ci.lower_truncation).to_string(),
            truncation_label(ci.upper_truncation).to_string(),
        ]);
    }
    let mut echo = data_echo("ci", &args.data);
    echo.push(format!(
        "methods = {}",
        methods.iter().map(|m| m.as_str().to_ascii_lowercase()).collect::<Vec<_>>().join(",")
    ));
    echo.push(format!("level = {}", args.level));
    echo.push(format!("n = {}", sample.len()));
    if args.data.out.is_some() {
        let table_header = ["equation", "method", "estimate", "interval", "length", "truncation"];
        let table_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let trunc = if r[8] == "none" && r[9] == "none" { "-".to_string() } else { format!("{}/{}", r[8], r[9]) };
                let length: f64 = r[5].parse().unwrap_or(f64::NAN);
                vec![r[0].clone(), r[1].clone(), r[6].clone(), r[7].clone(), significant(length, 7), trunc]
            })
            .collect();
        write!(stdout, "{}", render_table(&table_header, &table_rows))?;
    }
    emit(args.data.out.as_deref(), &echo, &csv_body(&header, &rows)?, stdout)
}

/// Per-observation depth and weight, plus the `sum n w^2` constant.
pub fn cmd_depth_weights(args: &DataArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if args.columns.is_empty() {
        return Err(CliError::Config("at least one column is required".into()));
    }
    let sample = ingest_csv(&args.input, &args.columns)?;
    let depths = sample_depths(&sample);
    let w = weights_for(args.weights, &sample)?;
    let header = ["index", "depth", "weight"];
    let rows: Vec<Vec<String>> = depths
        .iter()
        .zip(w.weights())
        .enumerate()
        .map(|(i, (d, wi))| vec![(i + 1).to_string(), full(*d), full(*wi)])
        .collect();
    let mut echo = data_echo("depth-weights", args);
    echo.retain(|l| !l.starts_with("equation"));
    echo.push(format!("n = {}", sample.len()));
    echo.push(format!("c_hat = {}", full(w.c_hat())));
    echo.push(format!("degenerate = {}", w.is_degenerate()));
    emit(args.out.as_deref(), &echo, &csv_body(&header, &rows)?, stdout)
}

fn design_label(family: &Family) -> String {
    match *family {
        Family::ContaminatedNormal { rho, contamination } => {
            format!("contaminated-normal(rho={rho} contamination={contamination})")
        }
        Family::Kotz { rho } => format!("kotz(rho={rho})"),
        Family::Pareto { scale, shape } => format!("pareto(theta={scale} beta={shape})"),
    }
}

/// Rows of the experiment CSV, including published reference values where
/// the design matches a tabulated one.
pub fn experiment_rows(report: &ExperimentReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec![
        "design",
        "method",
        "target",
        "n",
        "true_value",
        "coverage",
        "coverage_sd",
        "mean_length",
        "length_sd",
        "failures",
        "hull_truncated",
        "published_coverage",
        "published_coverage_sd",
        "published_length",
        "published_length_sd",
    ];
    let d = &report.design;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let published = reference::lookup(d, r.method, r.target);
            let opt = |f: fn(&reference::ReferenceValue) -> f64| published.as_ref().map(|p| f(p).to_string()).unwrap_or_default();
            vec![
                design_label(&d.family),
                r.method.as_str().to_string(),
                r.target.as_str().to_string(),
                d.n.to_string(),
                full(r.true_value),
                full(r.coverage),
                full(r.coverage_sd),
                full(r.mean_length),
                full(r.length_sd),
                r.failures.to_string(),
                r.hull_truncated.to_string(),
                opt(|p| p.coverage),
                opt(|p| p.coverage_sd),
                opt(|p| p.length),
                opt(|p| p.length_sd),
            ]
        })
        .collect();
    (header, rows)
}

/// Runs the design in `--config` and writes the coverage report.
pub fn cmd_experiment(args: &ExperimentArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if !args.config.exists() {
        return Err(CliError::FileNotFound(args.config.clone()));
    }
    let text = fs::read_to_string(&args.config)?;
    let mut design = SimDesign::from_config_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = args.seed {
        design.seed = s;
    }
    if let Some(r) = args.reps {
        design.reps = r;
    }
    if let Some(r) = args.runs {
        design.runs = r;
    }
    if let Some(m) = &args.methods {
        design.methods = parse_methods(m)?;
    }
    design.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let report = run_coverage_experiment(&design)?;
    let (header, rows) = experiment_rows(&report);
    let mut echo = vec!["command = experiment".to_string()];
    echo.extend(design.to_config_string().lines().map(str::to_string));
    if args.out.is_some() {
        let table_rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .zip(&rows)
            .map(|(r, row)| {
                vec![
                    row[1].clone(),
                    row[2].clone(),
                    format!("{:.3}({:.3})", r.coverage, r.coverage_sd),
                    format!("{:.3}({:.3})", r.mean_length, r.length_sd),
                    if row[11].is_empty() { "-".into() } else { format!("{}({})", row[11], row[12]) },
                    if row[13].is_empty() { "-".into() } else { format!("{}({})", row[13], row[14]) },
                    r.failures.to_string(),
                ]
            })
            .collect();
        writeln!(stdout, "{} n={}", design_label(&design.family), design.n)?;
        write!(
            stdout,
            "{}",
            render_table(
                &["method", "target", "coverage", "length", "published_cov", "published_len", "failures"],
                &table_rows
            )
        )?;
    }
    emit(args.out.as_deref(), &echo, &csv_body(&header, &rows)?, stdout)?;
    match report.total_failures() {
        0 => Ok(()),
        k => Err(CliError::Failures(k)),
    }
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, stdout),
        Command::Ci(a) => cmd_ci(a, stdout),
        Command::Experiment(a) => cmd_experiment(a, stdout),
        Command::DepthWeights(a) => cmd_depth_weights(a, stdout),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
