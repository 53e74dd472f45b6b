use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmconverse::commands::{self, exit, SweepSpec};
use mmconverse::io::{parse_channel, parse_distribution};
use mmconverse::verify::{run_verify, VerifyConfig};
use mmconverse::{Channel64, Error, RatePoint64, TolerancePolicy64};

/// Minimax-converse lower bounds on the error probability of channel codes.
#[derive(Parser)]
#[command(name = "mmconverse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Tolerances {
    /// Equality tolerance for masses and scores.
    #[arg(long, default_value_t = 1e-10)]
    tol_eq: f64,
    /// Largest accepted gap between upper and lower bound.
    #[arg(long, default_value_t = 1e-8)]
    tol_gap: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

impl Tolerances {
    fn policy(&self) -> Result<TolerancePolicy64, Error> {
        TolerancePolicy64::new(self.tol_eq, self.tol_gap, self.max_iter)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Smallest type-II error of a test with type-I success at least alpha.
    Beta {
        /// Distribution file for the null hypothesis.
        #[arg(long)]
        p: PathBuf,
        /// Distribution file for the alternative.
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        alpha: f64,
    },
    /// Converse bound for one use of a channel.
    Converse {
        #[arg(long)]
        channel: PathBuf,
        /// Rate in nats (bits with --bits).
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        bits: bool,
        /// Print the full saddle-point certificate.
        #[arg(long)]
        dump_certificate: bool,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Converse bound for n uses of a memoryless channel.
    ConverseDmc {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        n: usize,
        /// Total rate of the block in nats (bits with --bits).
        #[arg(long)]
        rate_total: f64,
        #[arg(long)]
        bits: bool,
        #[arg(long)]
        dump_certificate: bool,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Bound over an evenly spaced grid of rates, as CSV.
    Sweep {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        rate_min: f64,
        #[arg(long)]
        rate_max: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long)]
        bits: bool,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Randomized self-check against brute-force references.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

enum Failure {
    Lib(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn read_channel(path: &Path) -> Result<Channel64, Failure> {
    parse_channel(&read(path)?).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        e => e,
    })
    .map_err(Failure::Lib)
}

fn rate(value: f64, bits: bool) -> Result<RatePoint64, Error> {
    if bits {
        RatePoint64::from_bits(value)
    } else {
        RatePoint64::new(value)
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Beta { p, q, alpha } => {
            let p = parse_distribution(&read(&p)?)?;
            let q = parse_distribution(&read(&q)?)?;
            print!("{}", commands::cmd_beta(&p, &q, alpha)?);
            Ok(exit::OK)
        }
        Command::Converse { channel, rate: r, bits, dump_certificate, tol } => {
            let w = read_channel(&channel)?;
            let (text, cert) = commands::cmd_converse(&w, &rate(r, bits)?, &tol.policy()?, dump_certificate)?;
            print!("{text}");
            Ok(commands::status_exit_code(cert.status))
        }
        Command::ConverseDmc { channel, n, rate_total, bits, dump_certificate, tol } => {
            let w = read_channel(&channel)?;
            let (text, d) = commands::cmd_converse_dmc(&w, n, &rate(rate_total, bits)?, &tol.policy()?, dump_certificate)?;
            print!("{text}");
            Ok(commands::status_exit_code(d.certificate.status))
        }
        Command::Sweep { channel, rate_min, rate_max, steps, bits, out, tol } => {
            let w = read_channel(&channel)?;
            let scale = if bits { std::f64::consts::LN_2 } else { 1.0 };
            let spec = SweepSpec { rate_min: rate_min * scale, rate_max: rate_max * scale, steps };
            let csv = commands::cmd_sweep(&w, &spec, &tol.policy()?)?;
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| Failure::Io(path, e))?,
                None => print!("{csv}"),
            }
            Ok(exit::OK)
        }
        Command::Verify { seed, cases, inject_fault } => {
            let report = run_verify(&VerifyConfig { seed, cases, inject_fault })?;
            print!("{}", report.render());
            Ok(if report.passed() { exit::OK } else { exit::NUMERICAL })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(exit::INPUT)
        }
    }
}
