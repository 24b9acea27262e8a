//! Command-line front end: `classify`, `perturb`, `verify`, `moments`,
//! `emit` and `selftest`.
//!
//! Exit codes: 0 success, 1 usage error, 2 failed certificate or module
//! error, 3 `Unknown`/`Boundary` verdict under `--strict`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stieltjes_core::Error;

mod commands;
mod output;
mod selftest;

pub use output::{Report, Status, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "stieltjes", version, about = "Stieltjes classes for Y = a^X with certified arithmetic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether Stieltjes classes exist for Y = a^X
    Classify(ClassifyArgs),
    /// Tabulate p_j and the normalized perturbation h_j
    Perturb(PerturbArgs),
    /// Certify vanishing moment sums and validate class members
    Verify(VerifyArgs),
    /// Tabulate E[Y^k] for k <= max-k
    Moments(MomentsArgs),
    /// Write class-member masses g_j for each epsilon
    Emit(EmitArgs),
    /// Run the built-in invariant checks
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct DistArgs {
    /// `heine`, `poisson`, an inline JSON spec, or a path to a JSON spec
    #[arg(long)]
    dist: String,
    /// q for the Heine family, as p/q or a decimal
    #[arg(long)]
    q: Option<String>,
    /// lambda for the Heine and Poisson families
    #[arg(long)]
    lambda: Option<String>,
    /// Working precision in bits
    #[arg(long, default_value_t = 128)]
    prec: u32,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to a file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Significant digits in decimal output
    #[arg(long, default_value_t = 20)]
    digits: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    /// Family rule when one applies, otherwise the growth test
    Auto,
    Family,
    Growth,
    Beta,
    /// The auto choice plus every other applicable route as cross-checks
    All,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    dist: DistArgs,
    /// Base a of Y = a^X
    #[arg(long)]
    a: String,
    /// Index horizon for the growth and log-concavity tests
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
    route: RouteArg,
    /// Exit with 3 on Unknown or Boundary verdicts
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    a: String,
    /// Last index to tabulate
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Index limit for the decay certificate (default 10 (max-k + 10))
    #[arg(long)]
    scan_horizon: Option<usize>,
    #[arg(long, default_value_t = 10)]
    max_k: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    a: String,
    /// Epsilon values in [-1, 1], comma separated or repeated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    eps: Vec<String>,
    #[arg(long, default_value_t = 10)]
    max_k: usize,
    /// Absolute tolerance for every certificate
    #[arg(long, default_value = "1e-12")]
    target: String,
    /// Last mass index checked for nonnegativity
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long)]
    scan_horizon: Option<usize>,
    /// Attach the sequence on indices 0..=N only instead of the full support
    #[arg(long)]
    truncate: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    a: String,
    #[arg(long, default_value_t = 10)]
    max_k: usize,
    #[arg(long, default_value = "1e-12")]
    target: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long)]
    a: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1")]
    eps: Vec<String>,
    /// Last index to emit
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    #[arg(long)]
    scan_horizon: Option<usize>,
    #[arg(long)]
    truncate: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[command(flatten)]
    out: OutputArgs,
}

/// Failure of a command before it produced a report.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Module(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Domain(_) | Error::Range(_) => CliError::Usage(e.to_string()),
            other => CliError::Module(other),
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let (out, strict) = match &cli.command {
        Command::Classify(c) => (&c.out, c.strict),
        Command::Perturb(c) => (&c.out, false),
        Command::Verify(c) => (&c.out, false),
        Command::Moments(c) => (&c.out, false),
        Command::Emit(c) => (&c.out, false),
        Command::Selftest(c) => (&c.out, false),
    };
    let default_format = if matches!(cli.command, Command::Emit(_)) { Format::Csv } else { Format::Json };
    let format = out.format.unwrap_or(default_format);
    let result = match &cli.command {
        Command::Classify(c) => commands::classify(c),
        Command::Perturb(c) => commands::perturb(c),
        Command::Verify(c) => commands::verify(c),
        Command::Moments(c) => commands::moments(c),
        Command::Emit(c) => commands::emit(c),
        Command::Selftest(c) => selftest::run(c),
    };
    let (text, code) = match result {
        Ok(report) => {
            let code = match report.status {
                Status::Ok => EXIT_OK,
                Status::Failed => EXIT_FAILED,
                Status::Undecided if strict => EXIT_UNDECIDED,
                Status::Undecided => EXIT_OK,
            };
            match report.render(format == Format::Csv) {
                Ok(text) => (text, code),
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_FAILED;
                }
            }
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
        Err(CliError::Module(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            (output::error_text(&e, format == Format::Csv), EXIT_FAILED)
        }
    };
    let written = match &out.output {
        Some(path) => std::fs::write(path, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return EXIT_FAILED;
    }
    code
}
