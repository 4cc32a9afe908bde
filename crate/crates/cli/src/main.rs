//! `parabola`: finite-field progression counts, avoider searches, parabolic
//! dyadic geometry and the spectral-gap pipeline from the command line.
//!
//! JSON goes to stdout (or `--out`), diagnostics to stderr. Exit status is 0
//! on success, 2 for bad input or a violated precondition, 1 for an internal
//! invariant failure or a failed acceptance criterion.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parabola_core::Execution;

#[derive(Parser, Debug)]
#[command(
    name = "parabola",
    version,
    about = "Parabolic progressions {x, x + (z, z^2)}: counting, avoiders, Frostman measures and spectral gaps"
)]
struct Cli {
    /// Kernel execution strategy. Both give bit-identical results.
    #[arg(long, global = true, value_enum, default_value_t = ExecArg::Par)]
    exec: ExecArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ExecArg {
    Seq,
    Par,
}

impl From<ExecArg> for Execution {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Seq => Execution::Sequential,
            ExecArg::Par => Execution::Parallel,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact count of configurations (x, y), (x + z, y + z^2) inside a point set.
    Count(SetArgs),
    /// Compare the counting defect with q^{5/2}·‖f‖‖g‖ on random complex pairs.
    ErrorBound(ErrorBoundArgs),
    /// All parabola character sums S(a, b) over F_q.
    GaussScan(GaussScanArgs),
    /// Check a point set against the 2q^{3/2} size threshold.
    Threshold(SetArgs),
    /// Search for a large set with no configuration.
    Avoid(AvoidArgs),
    /// Dyadic parabolic Hausdorff content of a grid set.
    Content(ContentArgs),
    /// Frostman measure on a grid set.
    Frostman(FrostmanArgs),
    /// Riesz energy of a grid measure.
    Energy(EnergyArgs),
    /// Build the spectral-gap measure and its report.
    GapPipeline(GapPipelineArgs),
    /// Gaussian-smoothed convolution functional against the parabola.
    Functional(FunctionalArgs),
    /// Run the acceptance battery and print a pass/fail table.
    Suite(SuiteArgs),
}

#[derive(Args, Debug)]
struct SetArgs {
    /// Field spec: "p", "p^n", "p^n/c0,c1,...,1" or a prime power such as "9".
    #[arg(long)]
    field: String,
    /// Point set: a bit file (q rows of q bits, row x), "full", "empty" or
    /// "random:<size>".
    #[arg(long)]
    set: String,
    /// Seed for "random:<size>".
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ErrorBoundArgs {
    #[arg(long)]
    field: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random (f, g) pairs.
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct GaussScanArgs {
    #[arg(long)]
    field: String,
    /// CSV columns: a_index,b_index,re,im,modulus.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AvoidMode {
    /// Exact maximum independent set (q^2 ≤ 100).
    Exact,
    /// Seeded local search.
    Heuristic,
    /// Exact maximum subset of F_q with no difference a nonzero square.
    #[value(name = "1d")]
    OneDim,
}

#[derive(Args, Debug)]
struct AvoidArgs {
    #[arg(long)]
    field: String,
    #[arg(long, value_enum, default_value_t = AvoidMode::Exact)]
    mode: AvoidMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Local-search steps per restart (heuristic mode).
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    /// Write the avoiding set here, in the point-set bit format.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ContentArgs {
    /// Grid set: a gridset file, "full:<m>" or "empty:<m>".
    #[arg(long)]
    set: String,
    /// Exponent s in (0, 3].
    #[arg(long)]
    s: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum WeightArg {
    Rational,
    Double,
}

#[derive(Args, Debug)]
struct FrostmanArgs {
    #[arg(long)]
    set: String,
    #[arg(long)]
    s: f64,
    /// Write the measure here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightArg::Double)]
    format: WeightArg,
    /// Random parabolic balls sampled for the empirical Frostman constant.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum KernelArg {
    Center,
    CellAveraged,
}

#[derive(Args, Debug)]
struct MeasureSource {
    /// Grid measure file.
    #[arg(long, conflicts_with = "set")]
    measure: Option<PathBuf>,
    /// Grid set: uniform measure on it, or its Frostman measure with --s.
    #[arg(long)]
    set: Option<String>,
    /// Frostman exponent used with --set.
    #[arg(long, requires = "set")]
    s: Option<f64>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[command(flatten)]
    source: MeasureSource,
    /// Riesz exponent σ in (0, 2).
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::CellAveraged)]
    kernel: KernelArg,
    /// Also evaluate the Fourier-side energy truncated at this radius.
    #[arg(long)]
    fourier_radius: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GapPipelineArgs {
    #[arg(long)]
    set: String,
    #[arg(long)]
    s: f64,
    /// Number of generations T between the dense rectangle and its children.
    #[arg(long = "T", default_value_t = 1)]
    t: u32,
    #[arg(long = "A")]
    a: f64,
    /// "auto" for the largest B allowed by 2^{-T} B^6 ≤ A^{-3}, or a value.
    #[arg(long = "B", default_value = "auto")]
    b: String,
    /// Smoothing scale of the functional. Defaults to 1/(2B).
    #[arg(long)]
    delta: Option<f64>,
    /// Depth the measure is aggregated to before evaluating the functional.
    #[arg(long, default_value_t = 4)]
    functional_depth: u32,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add the mollifier tail certification to the report.
    #[arg(long)]
    certify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the assembled measure here (double weights).
    #[arg(long)]
    measure_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FunctionalArgs {
    #[command(flatten)]
    source: MeasureSource,
    /// Parabola truncation A ≥ 1: arclength on A^{-2} ≤ |z| ≤ 1.
    #[arg(long = "A", default_value_t = 2.0)]
    a: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Quadrature nodes on the parabola.
    #[arg(long, default_value_t = parabola_core::gapfinder::PARABOLA_NODES)]
    nodes: usize,
    /// With --B, also report the I1/I2/I3 split (needs 2^{-T} B^6 ≤ A^{-3}).
    #[arg(long = "B")]
    b: Option<f64>,
    #[arg(long = "T", default_value_t = 1)]
    t: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Reduced sample counts.
    #[arg(long)]
    quick: bool,
    /// Run only these criteria (repeatable).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    only: Vec<u8>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = Execution::from(cli.exec);
    match commands::run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
