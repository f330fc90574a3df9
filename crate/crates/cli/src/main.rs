//! Experiment runner: configuration in, CSV/JSON/SVG artifacts out.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiawork_core::experiment::{
    runners::{run_adiabatic_work, run_border, run_decay, run_full_suite, run_scaling},
    self_test, ExperimentConfig, RunOptions,
};
use adiawork_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "adiawork", version, about = "Decoherence and quantum-work experiments for a driven system in a chaotic bath")]
struct Cli {
    /// Experiment configuration file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the first sweep seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweep dispatch
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output directory (defaults to the config's output block)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run the built-in synthetic replays instead of a subcommand
    #[arg(long = "self-test")]
    self_test: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-coupling coherence decay and rate report
    Decay,
    /// ε sweep of decoherence vs transition rates
    Scaling,
    /// Perturbative-border table over system level pairs
    Border,
    /// Adiabatic work accounting on the configured ramp
    Work,
    /// All of the above into one output directory
    FullSuite,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if cli.self_test {
        let results = self_test();
        let mut all_pass = true;
        for r in &results {
            let status = if r.passed { "pass" } else { "FAIL" };
            println!("[{status}] {}: {}", r.name, r.detail);
            all_pass &= r.passed;
        }
        return if all_pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NUMERICAL) };
    }

    let Some(command) = cli.command else {
        eprintln!("error: expected a subcommand or --self-test (see --help)");
        return ExitCode::from(EXIT_CONFIG);
    };

    let cfg = match load_config(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let out_dir = cli
        .out
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let opts = RunOptions {
        out_dir,
        seed: cli.seed,
        workers: cli.workers,
        svg: None,
    };

    let outcome = match command {
        Command::Decay => run_decay(&cfg, &opts).map(|(report, a)| {
            println!(
                "decay: epsilon {:.6e}, R_d fitted {} (predicted {:.6e}), quality {}",
                report.epsilon,
                report
                    .r_d_fitted
                    .map(|r| format!("{r:.6e}"))
                    .unwrap_or_else(|| "n/a".into()),
                report.r_d_predicted,
                report
                    .fit_quality
                    .map(|q| format!("{q:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
            );
            a
        }),
        Command::Scaling => run_scaling(&cfg, &opts).map(|(report, a)| {
            match (&report.r_d_regression, &report.r_e_regression) {
                (Some(rd), Some(re)) => println!(
                    "scaling: R_d slope {:.3} +/- {:.3}, R_E slope {:.3} +/- {:.3}",
                    rd.slope, rd.ci95, re.slope, re.ci95
                ),
                _ => println!("scaling: per-point data only (no regression)"),
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            a
        }),
        Command::Border => run_border(&cfg, &opts).map(|(rows, a)| {
            for r in &rows {
                println!(
                    "border: ({}, {}) epsilon_p {:.6e}",
                    r.alpha, r.beta, r.epsilon_p
                );
            }
            a
        }),
        Command::Work => run_adiabatic_work(&cfg, &opts).map(|(record, a)| {
            println!(
                "work: mixture {:.6e}, TPM mean {:.6e}, Jarzynski deviation {:.3e}",
                record.mixture_work, record.tpm.mean, record.relative_jarzynski_deviation
            );
            a
        }),
        Command::FullSuite => run_full_suite(&cfg, &opts),
    };

    match outcome {
        Ok(artifacts) => {
            for f in &artifacts.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_config(path: Option<&std::path::Path>) -> adiawork_core::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::demo()),
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::DimensionMismatch(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}
