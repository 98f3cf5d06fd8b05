use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use simcmc::ssm::{simulate, DatasetFile, Kitagawa, LinearGaussianSpec, StateSpaceModel, Tracking, TrackingSpec};
use simcmc_harness::{
    run_experiment, tracking_comparison, verify_kernel, ExperimentConfig, HarnessError, RunReport, TrackingConfig,
};

#[derive(Parser)]
#[command(name = "simcmc", version, about = "Sequentially interacting MCMC experiments")]
struct Cli {
    /// Directory for reports when the config does not name one.
    #[arg(long, global = true, env = "SIMCMC_OUT_DIR", default_value = "simcmc-out")]
    out_dir: PathBuf,

    /// Exit with a nonzero status when any check fails.
    #[arg(long, global = true)]
    check: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated log-likelihood experiment from a TOML config.
    RunExperiment { config: PathBuf },
    /// Budgeted on-line tracking comparison from a TOML config.
    Tracking { config: PathBuf },
    /// Exact kernel checks on random enumerable targets.
    VerifyKernel {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulates a dataset and writes it as JSON.
    Simulate {
        model: ModelKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        /// State dimension of the linear Gaussian model.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Seed of the random linear Gaussian transition matrix.
        #[arg(long, default_value_t = 0)]
        matrix_seed: u64,
        /// Observation noise variance of the Kitagawa model.
        #[arg(long, default_value_t = 5.0)]
        sigma_w2: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    LinearGaussian,
    Kitagawa,
    Tracking,
}

fn write_dataset<M>(
    model: &M,
    params: impl Serialize,
    horizon: usize,
    seed: u64,
    out: &Path,
) -> Result<(), HarnessError>
where
    M: StateSpaceModel,
    M::State: Serialize,
    M::Obs: Serialize,
{
    let file = DatasetFile {
        model: params,
        dataset: simulate(model, horizon, seed),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

fn emit(report: &RunReport, dir: &Path) -> Result<(), HarnessError> {
    let (json, _) = report.write(dir)?;
    print!("{}", report.table());
    println!("report: {}", json.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    let report = match cli.command {
        Command::RunExperiment { config } => {
            let cfg = ExperimentConfig::from_toml(&fs::read_to_string(&config)?)?;
            let dir = cfg.output.clone().unwrap_or(cli.out_dir);
            let r = run_experiment(&cfg)?;
            emit(&r, &dir)?;
            r
        }
        Command::Tracking { config } => {
            let cfg = TrackingConfig::from_toml(&fs::read_to_string(&config)?)?;
            let dir = cfg.output.clone().unwrap_or(cli.out_dir);
            let r = tracking_comparison(&cfg)?;
            emit(&r, &dir)?;
            r
        }
        Command::VerifyKernel { instances, seed } => {
            let r = verify_kernel(instances, seed)?;
            emit(&r, &cli.out_dir)?;
            r
        }
        Command::Simulate {
            model,
            seed,
            out,
            horizon,
            dim,
            matrix_seed,
            sigma_w2,
        } => {
            if horizon == 0 {
                return Err(HarnessError::config("horizon", "must be at least 1"));
            }
            match model {
                ModelKind::LinearGaussian => {
                    let spec = LinearGaussianSpec::random(dim, 2.0, 0.5, matrix_seed)?;
                    write_dataset(&spec, &spec, horizon, seed, &out)?;
                }
                ModelKind::Kitagawa => {
                    let m = Kitagawa::new(5.0, sigma_w2);
                    write_dataset(&m, &m, horizon, seed, &out)?;
                }
                ModelKind::Tracking => {
                    let spec = TrackingSpec::default();
                    let m = Tracking::new(spec.clone())?;
                    write_dataset(&m, &spec, horizon, seed, &out)?;
                }
            }
            println!("wrote {}", out.display());
            return Ok(true);
        }
    };
    Ok(report.all_passed() || !cli.check)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
