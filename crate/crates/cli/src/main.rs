mod cmd;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hahnfit::Execution;

#[derive(Parser, Debug)]
#[command(name = "hahnfit", version, about = "Discrete orthogonal polynomial detrending and anomaly detection for GNSS orbits")]
struct Cli {
    /// Worker threads for parallel stages; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an orthonormal basis and write it to a cache file.
    Basis(cmd::basis::Args),
    /// Detrend a series and write the fit and residue.
    Fit(cmd::fit::Args),
    /// Scan SP3 orbits for jumps, outliers and maneuvers.
    Detect(cmd::detect::Args),
    /// Tabulate endpoint decay of normalized Hahn polynomials.
    Decay(cmd::decay::Args),
    /// Generate synthetic test data.
    Synth(cmd::synth::Args),
}

/// A problem with how the command was invoked.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Raised by `detect --fail-above` when an event exceeds the severity limit.
#[derive(Debug)]
pub struct SeverityExceeded(pub usize);

impl std::fmt::Display for SeverityExceeded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} event(s) above the severity limit", self.0)
    }
}

impl std::error::Error for SeverityExceeded {}

pub struct Context {
    pub exec: Execution,
    pub threads: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    if err.downcast_ref::<SeverityExceeded>().is_some() {
        return 4;
    }
    match err.downcast_ref::<hahnfit::Error>() {
        Some(hahnfit::Error::InvalidParameters(_) | hahnfit::Error::DegreeOutOfRange { .. }) => 1,
        Some(hahnfit::Error::NonConvergence { .. } | hahnfit::Error::DegenerateLattice { .. }) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = match cli.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let ctx = Context {
        exec: if threads == 1 { Execution::Sequential } else { Execution::Parallel },
        threads,
    };
    let go = move || match cli.command {
        Command::Basis(a) => cmd::basis::run(a, &ctx),
        Command::Fit(a) => cmd::fit::run(a, &ctx),
        Command::Detect(a) => cmd::detect::run(a, &ctx),
        Command::Decay(a) => cmd::decay::run(a, &ctx),
        Command::Synth(a) => cmd::synth::run(a, &ctx),
    };
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(go)
    }
    #[cfg(not(feature = "parallel"))]
    go()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
