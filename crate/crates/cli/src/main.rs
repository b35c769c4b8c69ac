mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::Format;

/// Purity relaxation experiments in staircase random circuits. Every run
/// writes a data table and a JSON manifest; with `--out` the manifest goes
/// to `<out>.manifest.json`, otherwise data goes to stdout and the manifest
/// to stderr.
#[derive(Parser, Debug)]
#[command(name = "phantomlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Data file; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Arith {
    Rational,
    Float64,
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum CoeffMethod {
    Exact,
    Approx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum SpectrumTable {
    Counts,
    Spectra,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Purity vectors I_k(t) and deviations from the random-state value.
    /// Columns: t, k, purity, delta, log10_abs_delta.
    Trajectory(TrajectoryArgs),
    /// Effective rate lambda_eff(t) = dI(t+1)/dI(t) for a list of cuts.
    /// Columns: t, k, lambda_eff, lambda_eff_minus_lambda1.
    Rates(RatesArgs),
    /// Expansion coefficients c_j of the spectral decomposition.
    /// Columns: j, lambda_j, sign, log10_abs_c.
    Coefficients(CoefficientsArgs),
    /// Magic sums f_k(p) on a (k, p) grid.
    /// Columns: k, p, value, log10_abs, in_zero_pattern, exact.
    MagicSums(MagicArgs),
    /// Kernel/spectrum cancellation reports for t <= t_K.
    /// Columns: k, t, kernel, spectral, residual, relative_residual,
    /// series_vs_iteration, passed. Exits 1 if any cell fails.
    KernelCheck(KernelArgs),
    /// Theta-function transition curve with the exact rate overlaid.
    /// Columns: t, regime, theory, exact, rel_err, short, long, long_exp.
    Theta(ThetaArgs),
    /// Spectra of T + eps E over an eps grid.
    /// Columns (counts): log10_eps, realization, real_count, theory_count,
    /// kernel_radius. Columns (spectra): log10_eps, realization, index, re,
    /// im, real.
    Pseudospectrum(PseudoArgs),
    /// Haar circuit Monte Carlo purities.
    /// Columns: k, t, mean, stderr, realizations (+ model, within_3sigma
    /// with --compare).
    Montecarlo(McArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct TrajectoryArgs {
    #[arg(long)]
    n: usize,
    /// Cuts to report (comma separated); all interior cuts by default.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long)]
    t_max: usize,
    #[arg(long, value_enum, default_value_t = Arith::Rational)]
    mode: Arith,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RatesArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    d: u32,
    /// Defaults to 4n.
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, value_enum, default_value_t = Arith::Rational)]
    mode: Arith,
    /// Mantissa bits for extended mode; chosen from (n, d) by default.
    #[arg(long)]
    precision_bits: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CoefficientsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, value_enum, default_value_t = CoeffMethod::Exact)]
    method: CoeffMethod,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct MagicArgs {
    #[arg(long)]
    n: usize,
    /// Cuts (comma separated); all of 2..n-1 by default.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Defaults to -n.
    #[arg(long, allow_hyphen_values = true)]
    p_min: Option<i64>,
    /// Defaults to n.
    #[arg(long, allow_hyphen_values = true)]
    p_max: Option<i64>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct KernelArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Every cut 2..n-1.
    #[arg(long)]
    all_k: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ThetaArgs {
    #[arg(long)]
    n: usize,
    /// 2 or n/2.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    d: u32,
    /// Defaults to t_c.
    #[arg(long)]
    t_min: Option<usize>,
    #[arg(long)]
    t_max: usize,
    #[arg(long, default_value_t = 1)]
    t_step: usize,
    /// Arithmetic of the exact overlay.
    #[arg(long, value_enum, default_value_t = Arith::Float64)]
    exact_mode: Arith,
    /// Skip the exact overlay.
    #[arg(long)]
    no_exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct PseudoArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: u32,
    /// eps = 10^-x for x = from:step:to.
    #[arg(long, default_value = "5:0.5:60")]
    eps_exp: String,
    #[arg(long, default_value_t = phantomlab::pseudospectrum::DEFAULT_PRECISION_BITS)]
    precision_bits: usize,
    #[arg(long, default_value_t = phantomlab::pseudospectrum::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    /// Relative |Im| cutoff for counting an eigenvalue as real.
    #[arg(long, default_value_t = phantomlab::pseudospectrum::DEFAULT_REAL_THRESHOLD)]
    real_threshold: f64,
    #[arg(long, value_enum, default_value_t = SpectrumTable::Counts)]
    table: SpectrumTable,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct McArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    t_max: usize,
    #[arg(long, default_value_t = 10_000)]
    realizations: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Add the exact model value and a 3-sigma agreement flag.
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

fn set_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PHANTOMLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PHANTOMLAB_THREADS must be a positive integer (got {v:?})"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = set_threads() {
        eprintln!("usage error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(problems)) => {
            for p in problems {
                eprintln!("usage error: {p}");
            }
            ExitCode::from(2)
        }
        Err(commands::Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
