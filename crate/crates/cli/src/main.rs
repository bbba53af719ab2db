use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use critwave_cli::commands::{failure_artifacts, pc_report};
use critwave_cli::{dispatch, parse_config, CliError, ConfigError, Subcommand};

#[derive(Parser)]
#[command(name = "critwave", version, about = "Damped semilinear wave experiments")]
enum Cli {
    /// Print the critical exponent and lifespan exponents.
    Pc {
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Integrate one problem and write its time series.
    Simulate(RunArgs),
    /// Lifespan sweep over a geometric sequence of amplitudes.
    Sweep(RunArgs),
    /// Calibrate the weight function and tabulate its margins.
    VerifyWeight(RunArgs),
    /// Evaluate the interpolation-inequality corpus.
    VerifyIneq(RunArgs),
    /// Test-function probes along a recorded blow-up run.
    Testfn(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[output] output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn report(err: &CliError) {
    eprintln!("error: {err}");
    eprintln!("{}", err.diagnostic());
}

fn run_config(sub: Subcommand, args: RunArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            report(&ConfigError::violation("config", format!("cannot read {}: {e}", args.config.display())).into());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            report(&e.into());
            return ExitCode::from(2);
        }
    };
    if args.output_dir.is_some() {
        config.output_dir = args.output_dir;
    }
    match dispatch(sub, &config) {
        Ok(set) => {
            let dir = config.output_dir.as_ref().expect("checked by dispatch");
            if let Err(e) = set.commit(dir) {
                report(&CliError::Io(e));
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            report(&err);
            if let (CliError::Numerical(_), Some(dir)) = (&err, &config.output_dir) {
                if let Err(e) = failure_artifacts(sub, &config, &err).commit(dir) {
                    eprintln!("error: could not write diagnostics: {e}");
                }
            }
            ExitCode::from(err.exit_code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse() {
        Cli::Pc { dim, alpha, p } => match pc_report(dim, alpha, p) {
            Ok(v) => {
                println!("p_c = {}", v["p_c"].as_f64().unwrap_or(f64::NAN));
                if let Some(list) = v["lifespan"].as_array() {
                    for e in list {
                        let beta = &e["beta"];
                        match e["regime"].as_str() {
                            Some("subcritical") => println!("beta = {beta}: subcritical, kappa = {}", e["kappa"]),
                            Some("critical") => println!("beta = {beta}: critical, exponent = {}", e["exponent"]),
                            _ => println!("beta = {beta}: supercritical, no lifespan bound"),
                        }
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                report(&e);
                ExitCode::from(e.exit_code())
            }
        },
        Cli::Simulate(a) => run_config(Subcommand::Simulate, a),
        Cli::Sweep(a) => run_config(Subcommand::Sweep, a),
        Cli::VerifyWeight(a) => run_config(Subcommand::VerifyWeight, a),
        Cli::VerifyIneq(a) => run_config(Subcommand::VerifyIneq, a),
        Cli::Testfn(a) => run_config(Subcommand::Testfn, a),
    }
}
