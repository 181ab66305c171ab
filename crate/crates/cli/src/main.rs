mod cache;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "gl2newform", version, about = "Whittaker newform values and sup-norms for GL(2, Q_p)")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Working precision of complex arithmetic, in bits.
    #[arg(long, global = true, default_value_t = 128)]
    pub precision_bits: u32,
    /// Largest t solved for; defaults to 2n + 20 per representation.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tmax: Option<i64>,
    /// Tolerance of solver-mediated checks (default 1e-12).
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory of cached coefficient tables.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Report wall-clock times (scan rows gain a column; output is then not reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Value of W_pi (or W*_pi) on one coset g_{t,k,v}.
    Value(ValueArgs),
    /// Sup-norms and reference bounds over a family of representations.
    Scan(ScanArgs),
    /// Run the verification checks.
    Verify(VerifyArgs),
    /// Write a synthetic supercuspidal oracle file (structural testing only).
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RepArgs {
    #[arg(long)]
    pub p: u64,
    /// Principal series: two extended characters `CHAR,CHAR`.
    #[arg(long, group = "rep")]
    pub ps: Option<String>,
    /// Steinberg twist by one extended character.
    #[arg(long, group = "rep")]
    pub st: Option<String>,
    /// Supercuspidal `n,OMEGA`; needs `--oracle`.
    #[arg(long, group = "rep")]
    pub sc: Option<String>,
    /// Oracle file with the twist data of a supercuspidal.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ValueArgs {
    #[command(flatten)]
    pub rep: RepArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub t: i64,
    #[arg(long)]
    pub k: u32,
    #[arg(long, allow_hyphen_values = true)]
    pub v: i128,
    /// Evaluate W*_pi instead of W_pi.
    #[arg(long)]
    pub conjugate: bool,
    #[arg(long, value_enum, default_value_t = ValueFormat::Text)]
    pub format: ValueFormat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueFormat {
    Text,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Ps,
    Steinberg,
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub nmax: u32,
    #[arg(long, value_enum, default_value_t = FamilyKind::All)]
    pub family: FamilyKind,
    /// Keep only m <= ceil(n/2).
    #[arg(long)]
    pub conjecture_regime: bool,
    #[arg(long)]
    pub a1max: Option<u32>,
    #[arg(long)]
    pub a2max: Option<u32>,
    /// Largest conductor exponent of the Steinberg twist.
    #[arg(long)]
    pub ximax: Option<u32>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gl1,
    Reps,
    Theorem,
    Supercuspidal,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Comma-separated primes.
    #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
    pub p: Vec<u64>,
    /// Largest character conductor in the GL(1) checks.
    #[arg(long, default_value_t = 3)]
    pub amax: u32,
    /// Largest conductor exponent of representations.
    #[arg(long, default_value_t = 4)]
    pub nmax: u32,
    /// Multiply every root number by (1 + delta); the checks must then fail.
    #[arg(long)]
    pub perturb_eps: Option<f64>,
    /// Output file for the JSON report (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long)]
    pub p: u64,
    /// `n,OMEGA`.
    #[arg(long)]
    pub sc: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    if !(64..=4096).contains(&cli.common.precision_bits) {
        return Err(CliError::Usage("--precision-bits must lie in 64..=4096".into()));
    }
    match cli.command {
        Command::Value(a) => commands::value(&cli.common, &a),
        Command::Scan(a) => commands::scan(&cli.common, &a),
        Command::Verify(a) => commands::verify(&cli.common, &a),
        Command::Oracle(a) => commands::oracle(&cli.common, &a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
