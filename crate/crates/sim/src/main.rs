use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hsr_ici_sim::config::{AdjointChoice, KernelChoice, SimConfig};
use hsr_ici_sim::experiments::{self, Algorithm, Context, ExperimentError};
use hsr_ici_sim::{verify, ExperimentResult};

#[derive(Parser)]
#[command(name = "hsr-ici", version, about = "ICI experiments for distributed-antenna high-speed railway downlinks")]
struct Cli {
    /// TOML deployment configuration (defaults to the reference corridor).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all Monte Carlo streams.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// LOS ICI kernel (overrides the config file).
    #[arg(long, global = true, value_enum)]
    kernel: Option<KernelChoice>,
    /// Equalizer adjoint (overrides the config file).
    #[arg(long, global = true, value_enum)]
    adjoint: Option<AdjointChoice>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact SIR along one inter-RRU span.
    Sweep {
        #[arg(long)]
        omega_d: f64,
        /// Rician K in dB, or `inf` for a pure LOS channel.
        #[arg(long, default_value = "inf")]
        k_db: f64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        alg: u8,
        #[arg(long, default_value_t = experiments::DEFAULT_STEP_M)]
        step_m: f64,
    },
    /// SIR extremes and mobile service versus Doppler.
    Table1,
    /// Statistics across antenna regimes.
    Table2,
    /// Statistics versus Rician K.
    Table3,
    /// Accumulated service quantity curves.
    Asq {
        #[arg(long, value_delimiter = ',', default_values_t = experiments::ASQ_OMEGAS)]
        omega_d: Vec<f64>,
    },
    /// Oracle verification suite; exits 1 if any check fails.
    Verify,
}

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load_config(cli: &Cli) -> Result<SimConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::load(path).map_err(|e| e.to_string())?,
        None => SimConfig::default(),
    };
    if let Some(k) = cli.kernel {
        cfg.conventions.kernel = k.into();
    }
    if let Some(a) = cli.adjoint {
        cfg.conventions.adjoint = a.into();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn emit(result: &ExperimentResult, cli: &Cli) -> Result<(), ExitCode> {
    match result.write_to(&cli.out) {
        Ok(path) => {
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", cli.out.display());
            Err(ExitCode::from(EXIT_RUNTIME))
        }
    }
}

fn fail(e: ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        ExperimentError::Invalid(_) | ExperimentError::Model(hsr_ici::Error::InvalidConfig(_)) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let ctx = Context::new(config, cli.seed);
    let result = match &cli.command {
        Command::Sweep {
            omega_d,
            k_db,
            alg,
            step_m,
        } => {
            let alg = Algorithm::from_number(*alg).expect("clap restricts --alg to 1 or 2");
            experiments::run_position_sweep(&ctx, *omega_d, experiments::k_from_db(*k_db), alg, *step_m)
        }
        Command::Table1 => experiments::run_table1(&ctx),
        Command::Table2 => experiments::run_table2(&ctx),
        Command::Table3 => experiments::run_table3(&ctx),
        Command::Asq { omega_d } => experiments::run_asq(&ctx, omega_d),
        Command::Verify => match verify::run_verify(&ctx) {
            Ok((result, ok)) => {
                if let Err(code) = emit(&result, &cli) {
                    return code;
                }
                print!("{}", result.to_csv());
                return if ok {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("verification failed");
                    ExitCode::from(EXIT_VERIFY_FAILED)
                };
            }
            Err(e) => return fail(e),
        },
    };
    match result {
        Ok(r) => match emit(&r, &cli) {
            Ok(()) => ExitCode::SUCCESS,
            Err(code) => code,
        },
        Err(e) => fail(e),
    }
}
