use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gsk_gl::experiments::{self, Command, ExperimentConfig};
use gsk_gl::Error;

/// Ginzburg-Landau approximation experiments for the Gray-Scott-Klausmeier system.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// TOML configuration; defaults are used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// CSV destination (overrides `output.path`); stdout by default.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Homogeneous equilibria at the configured rainfall.
    FixedPoints,
    /// Leading eigenvalues below, at and above the Turing point.
    Dispersion,
    /// Turing point and semigroup decay probe.
    Critical,
    /// Amplitude-equation coefficients.
    GlCoeffs,
    /// Full system against the amplitude equation for one ε.
    Simulate,
    /// Residual norms of the ansatz over the ε sweep.
    ValidateResidualScaling,
    /// Approximation error over the ε sweep.
    ValidateErrorScaling,
    /// Cubic coefficient from a homogeneous saturation run.
    AmplitudeSaturation,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::FixedPoints => Command::FixedPoints,
            Cmd::Dispersion => Command::Dispersion,
            Cmd::Critical => Command::Critical,
            Cmd::GlCoeffs => Command::GlCoeffs,
            Cmd::Simulate => Command::Simulate,
            Cmd::ValidateResidualScaling => Command::ValidateResidualScaling,
            Cmd::ValidateErrorScaling => Command::ValidateErrorScaling,
            Cmd::AmplitudeSaturation => Command::AmplitudeSaturation,
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        _ => 3,
    }
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = experiments::run(cli.command.into(), &cfg)?;
    let dest = cli.output.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    let meta = out.metadata(&cfg);
    match dest {
        Some(p) => {
            let mut w = BufWriter::new(File::create(&p)?);
            out.table.write(&meta, &mut w)?;
            w.flush()?;
        }
        None => out.table.write(&meta, &mut io::stdout().lock())?,
    }
    for line in &out.summary {
        eprintln!("{line}");
    }
    for c in &out.checks {
        eprintln!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    for a in &out.aborts {
        eprintln!("abort: {a}");
    }
    Ok(out.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
