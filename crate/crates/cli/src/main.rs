mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nbcount::intervals::{Method, OGDEN_LOWER, OGDEN_UPPER};
use nbcount::Error;
use output::Format;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Negative-binomial count statistics: quantiles, confidence limits,
/// detection limits and coverage simulation.
#[derive(Parser, Debug)]
#[command(name = "nbcount", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Dsv)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count quantile of the model at one mean.
    Quantile(QuantileArgs),
    /// Two-sided confidence limits on the mean for observed counts.
    Ci(CiArgs),
    /// Confidence table of RSD and rounded limits over a list of counts.
    Table(TableArgs),
    /// Decision limit for background-interfered counts.
    Lod(LodArgs),
    /// Detection limit at a stated power.
    Dl(DlArgs),
    /// Monte-Carlo coverage of interval methods over a grid of means.
    Simulate(SimulateArgs),
    /// Curve data: normalized quantiles, relative limits, pivot cdfs.
    Curves(CurvesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum QuantileKind {
    Exact,
    Discrete,
    Smooth,
}

#[derive(Args, Debug)]
pub struct QuantileArgs {
    #[arg(long, value_parser = positive)]
    pub mean: f64,
    #[arg(long, default_value_t = 0.2, value_parser = trsd)]
    pub trsd: f64,
    #[arg(long, default_value_t = 0.95, value_parser = open_probability)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = QuantileKind::Exact)]
    pub kind: QuantileKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum CiMethod {
    /// Poisson closed form at trsd 0, direct below 0.2, pivot otherwise.
    Auto,
    Pivot,
    Direct,
    PoissonClosedForm,
    ChiSquare,
    Ogden,
}

impl CiMethod {
    pub fn method(self) -> Option<Method> {
        match self {
            CiMethod::Auto => None,
            CiMethod::Pivot => Some(Method::Pivot),
            CiMethod::Direct => Some(Method::Direct),
            CiMethod::PoissonClosedForm => Some(Method::PoissonClosedForm),
            CiMethod::ChiSquare => Some(Method::ChiSquare),
            CiMethod::Ogden => Some(Method::Ogden),
        }
    }
}

#[derive(Args, Debug)]
pub struct CiArgs {
    /// Observed counts (comma separated or repeated).
    #[arg(long = "count", required = true, value_delimiter = ',')]
    pub counts: Vec<u64>,
    #[arg(long, default_value_t = 0.2, value_parser = trsd)]
    pub trsd: f64,
    /// Two-sided confidence level.
    #[arg(long, default_value_t = 0.95, value_parser = open_probability)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = CiMethod::Auto)]
    pub method: CiMethod,
    /// Constant in the lower limit of the ogden method.
    #[arg(long, default_value_t = OGDEN_LOWER)]
    pub ogden_lower: f64,
    /// Constant in the upper limit of the ogden method.
    #[arg(long, default_value_t = OGDEN_UPPER)]
    pub ogden_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LimitRounding {
    /// Pivot constants rounded to one decimal before solving.
    OneDecimal,
    Exact,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(long, default_value_t = 0.2, value_parser = trsd)]
    pub trsd: f64,
    #[arg(long, default_value_t = 0.95, value_parser = open_probability)]
    pub level: f64,
    /// Counts to tabulate; pass `--counts` with no value for an empty table.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub counts: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value_t = LimitRounding::OneDecimal)]
    pub limits: LimitRounding,
}

#[derive(Args, Debug)]
pub struct DetectionArgs {
    /// Counted filter area, mm².
    #[arg(long, default_value_t = 0.785, value_parser = positive)]
    pub area: f64,
    /// Mean interfering-fiber density, mm⁻².
    #[arg(long, default_value_t = 2.5, value_parser = nonnegative)]
    pub background: f64,
    #[arg(long, default_value_t = 0.2, value_parser = trsd)]
    pub trsd: f64,
    /// False-positive rate, in (0, 0.5).
    #[arg(long, default_value_t = 0.001, value_parser = alpha)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LodMethod {
    Nb,
    Normal,
    Both,
}

#[derive(Args, Debug)]
pub struct LodArgs {
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[arg(long, value_enum, default_value_t = LodMethod::Both)]
    pub method: LodMethod,
    /// Baseline sd of the normal model, mm⁻².
    #[arg(long, default_value_t = 1.5, value_parser = nonnegative)]
    pub sigma0: f64,
    /// Emit the cumulative background distributions instead of the summary.
    #[arg(long)]
    pub curve: bool,
}

#[derive(Args, Debug)]
pub struct DlArgs {
    #[command(flatten)]
    pub detection: DetectionArgs,
    /// Required probability of exceeding the LOD, in (0.5, 1).
    #[arg(long, default_value_t = 0.8, value_parser = power)]
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum GridPreset {
    /// 5.1 to 30 in steps of 0.1.
    Fine,
    /// 5 to 30 in unit steps.
    Coarse,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.2, value_parser = trsd)]
    pub trsd: f64,
    /// Two-sided nominal level.
    #[arg(long, default_value_t = 0.90, value_parser = open_probability)]
    pub level: f64,
    #[arg(long, default_value_t = nbcount::simulate::DEFAULT_REPS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Interval methods (comma separated or repeated).
    #[arg(
        long = "method",
        value_enum,
        value_delimiter = ',',
        default_value = "pivot"
    )]
    pub methods: Vec<SimMethod>,
    #[arg(long, value_enum, default_value_t = GridPreset::Fine)]
    pub grid: GridPreset,
    /// Explicit grid start; overrides the preset together with the end and step.
    #[arg(long, requires_all = ["grid_end", "grid_step"], value_parser = positive)]
    pub grid_start: Option<f64>,
    #[arg(long, requires = "grid_start", value_parser = positive)]
    pub grid_end: Option<f64>,
    #[arg(long, requires = "grid_start", value_parser = positive)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SimMethod {
    Pivot,
    Direct,
    PoissonClosedForm,
    ChiSquare,
    Ogden,
}

impl From<SimMethod> for Method {
    fn from(m: SimMethod) -> Self {
        match m {
            SimMethod::Pivot => Method::Pivot,
            SimMethod::Direct => Method::Direct,
            SimMethod::PoissonClosedForm => Method::PoissonClosedForm,
            SimMethod::ChiSquare => Method::ChiSquare,
            SimMethod::Ogden => Method::Ogden,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum CurveKind {
    /// Normalized quantiles `(n_b - N)/σ` against N, with the asymptote.
    PivotQuantile,
    /// Relative limits `(limit - n)/n` in percent against the count.
    RelativeCi,
    /// Exact pivot cdfs at several means plus the approximate curve.
    PivotCdf,
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[arg(long, value_enum)]
    pub kind: CurveKind,
    /// Relative sd; a comma-separated list gives one series per value for
    /// pivot-quantile.
    #[arg(long, default_value = "0.2", value_delimiter = ',', value_parser = trsd)]
    pub trsd: Vec<f64>,
    /// Quantile level (pivot-quantile) or two-sided level (relative-ci).
    #[arg(long, default_value_t = 0.95, value_parser = open_probability)]
    pub level: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub mean_min: f64,
    #[arg(long, default_value_t = 100.0, value_parser = positive)]
    pub mean_max: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub mean_step: f64,
    /// Counts for relative-ci; defaults to 1..=200.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<u64>>,
    /// Means for pivot-cdf.
    #[arg(long, value_delimiter = ',', default_value = "5,15,25", value_parser = positive)]
    pub means: Vec<f64>,
    /// Points in the approximate pivot-cdf series.
    #[arg(long, default_value_t = 141, value_parser = clap::value_parser!(u64).range(2..))]
    pub points: u64,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn trsd(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1), got {v}"))
    }
}

fn open_probability(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

fn alpha(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 0.5 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 0.5), got {v}"))
    }
}

fn power(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.5 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0.5, 1), got {v}"))
    }
}

/// Name of a flag value as typed on the command line.
pub fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let table = match commands::run(&cli.command) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cli.out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            table.write(cli.format, &mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(cli.format, &mut lock)
        }
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            ExitCode::FAILURE
        }
    }
}
