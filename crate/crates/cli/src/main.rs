//! `clawbell`: key generation, the verifier and prover roles, and the experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "clawbell", version, about = "Computational Bell test: verifier, provers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a key file holding the public index and the trapdoor.
    Keygen(KeygenArgs),
    /// Run the verifier against a prover in another process.
    Verify(VerifyArgs),
    /// Serve a simulated prover over stdio or TCP.
    Prove(ProveArgs),
    /// Run verifier and prover in one process.
    Run(RunArgs),
    /// Score against circuit fidelity, with and without the lift.
    Sweep(SweepArgs),
    /// Count qubits, gates and depth of a circuit builder.
    Resources(ResourcesArgs),
    /// Extract a claw from a prover by rewinding, then factor the modulus.
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Rabin,
    Ddh,
}

#[derive(Debug, Args)]
struct KeygenArgs {
    #[arg(long, value_enum, default_value = "rabin")]
    family: Family,
    /// Modulus size for Rabin, group size for DDH.
    #[arg(long, default_value_t = 64)]
    bits: u32,
    /// Matrix dimension for DDH keys.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Key file with the trapdoor; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a copy without the trapdoor.
    #[arg(long)]
    public_out: Option<PathBuf>,
}

/// Options shared by the commands that play the protocol.
#[derive(Debug, Args)]
struct SessionArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability of the preimage challenge.
    #[arg(long, default_value_t = 0.5)]
    challenge_ratio: f64,
    /// Score iterations whose image has no preimage instead of discarding them.
    #[arg(long)]
    no_postselect: bool,
    /// Score report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// One JSON transcript per line.
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Key file with the trapdoor.
    #[arg(long)]
    key: PathBuf,
    #[command(flatten)]
    session: SessionArgs,
    /// Accept one prover connection on this address.
    #[arg(long, conflicts_with = "spawn", required_unless_present = "spawn")]
    listen: Option<String>,
    /// Start the prover as a child process talking over its stdin and stdout;
    /// the command line is split on whitespace.
    #[arg(long)]
    spawn: Option<String>,
    /// Seconds to wait for each reply.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Debug, Args)]
struct ProveArgs {
    /// `ideal`, `cheater`, `noisy:F=<f>[,circuit=<builder>][,m=<lift>][,theta=<rad>]`
    /// or `phase:delta=<d>[,theta=<rad>]`.
    #[arg(long, default_value = "ideal")]
    prover: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Connect to a listening verifier instead of serving stdio.
    #[arg(long)]
    connect: Option<String>,
    /// Seconds to wait for each request.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Debug, Args)]
struct KeySource {
    /// Key file with the trapdoor; a Rabin key is generated from `--bits` and `--seed`
    /// when omitted.
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    bits: u32,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    key: KeySource,
    #[arg(long, default_value = "ideal")]
    prover: String,
    #[command(flatten)]
    session: SessionArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Protocol,
    StateAnalysis,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiscardArg {
    Prover,
    Verifier,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 64)]
    bits: u32,
    /// Lift exponents, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    m: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    fidelities: Vec<f64>,
    /// Iterations (or circuit runs, for state analysis) per point.
    #[arg(long, default_value_t = 2000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "schoolbook")]
    circuit: String,
    #[arg(long, value_enum, default_value = "protocol")]
    estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "verifier")]
    discard: DiscardArg,
    /// JSON rows plus per-m thresholds instead of CSV.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BasisArg {
    Native,
    CliffordT,
}

#[derive(Debug, Args)]
struct ResourcesArgs {
    /// `schoolbook`, `karatsuba[:cutoff]`, `phase1` or `phase2`.
    #[arg(long, default_value = "schoolbook")]
    builder: String,
    #[arg(long, default_value_t = 128)]
    n: u32,
    /// Gate weighting for the arithmetic builders.
    #[arg(long, value_enum, default_value = "clifford-t")]
    basis: BasisArg,
    /// Lift exponent for the arithmetic builders.
    #[arg(long, default_value_t = 0)]
    lift: u32,
    /// Seed of the Blum modulus the arithmetic builders are specialised to.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    key: KeySource,
    #[arg(long, default_value = "ideal")]
    prover: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Advantage the list decoder is sized for.
    #[arg(long, default_value_t = 0.25)]
    mu: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen(a) => commands::keygen(a),
        Command::Verify(a) => commands::verify(a),
        Command::Prove(a) => commands::prove(a),
        Command::Run(a) => commands::run(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Resources(a) => commands::resources(a),
        Command::Extract(a) => commands::extract(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
