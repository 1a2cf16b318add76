//! Command-line front end: `train`, `diagnose`, `verify` and `experiment`.

pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::calculus::oracle::run_oracle_suite;
use crate::diagnostics::{
    certify_theorem1, classify_layers, lipschitz_estimates, width_advisory, CertificateOptions, DiagnosticsReport,
};
use crate::error::{Error, Result};
use crate::experiments::{
    run_four_region, run_representation_compare, run_slope_sweep, ExperimentName, ExperimentReport,
};
use crate::network::{init_weights_with, Checkpoint, InitOptions};
use crate::training::train;
use config::{load, DiagnoseFile, ExperimentFile, TrainFile, VerifyFile};

pub const LOG_ENV: &str = "MNL_LOG_LEVEL";
const LOG_LEVELS: [&str; 5] = ["error", "warn", "info", "debug", "trace"];

#[derive(Debug, Parser)]
#[command(name = "mnl", version, about = "Jacobian calculus, rank certificates and experiments for smooth feedforward networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and write `checkpoint.json` and `train_log.csv`.
    Train(TrainArgs),
    /// Write `diagnostics.json` for a checkpoint and dataset.
    Diagnose(DiagnoseArgs),
    /// Run the derivative oracle suite; exit status 1 on any tolerance breach.
    Verify(VerifyArgs),
    /// Run `four-region`, `figure-eight` or `swiss-roll`.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides both the init seed and the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write `oracle_report.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub name: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Replaces the seed list by the same number of consecutive seeds starting here.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Installs the logger from `MNL_LOG_LEVEL` (default `info`).
pub fn init_logging() -> Result<()> {
    let level = std::env::var(LOG_ENV).unwrap_or_else(|_| "info".into());
    if !LOG_LEVELS.contains(&level.as_str()) {
        return Err(Error::Config(format!(
            "{LOG_ENV}={level:?} is not one of {}",
            LOG_LEVELS.join(", ")
        )));
    }
    let _ = env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut file: TrainFile = load(&args.config)?;
    if let Some(seed) = args.seed {
        file.init.seed = seed;
        file.train.seed = seed;
    }
    file.check()?;
    let arch = file.architecture.build()?;
    let data = file.data.load(&config_dir(&args.config))?;
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let ws0 = init_weights_with(
        &arch,
        file.init.seed,
        InitOptions {
            scale: file.init.scale,
            bias_scale: file.init.bias_scale,
        },
    )?;
    let (ws, log) = train(file.trainer, &arch, &ws0, &data, file.loss, &file.train)?;
    let last = log.last();
    log::info!(
        "trained {} iterations ({:?}): loss {:e}, gradient norm {:e}",
        log.iterations,
        log.stop_reason,
        last.loss,
        last.grad_norm
    );
    std::fs::create_dir_all(&args.out)?;
    Checkpoint::new(&arch, &ws, file.init.seed).write(&args.out.join("checkpoint.json"))?;
    std::fs::write(args.out.join("train_log.csv"), log.to_csv_string()?)?;
    println!("{}", args.out.display());
    Ok(())
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let file: DiagnoseFile = load(&args.config)?;
    file.check()?;
    let base = config_dir(&args.config);
    let ckpt_path = base.join(&file.checkpoint);
    if !ckpt_path.is_file() {
        return Err(Error::Config(format!("checkpoint {} not found", ckpt_path.display())));
    }
    let (arch, ws) = Checkpoint::read(&ckpt_path)?.restore()?;
    let data = file.data.load(&base)?;
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let probe = file.probe.clone().unwrap_or_else(|| data.inputs[0].clone());
    let cert = certify_theorem1(
        &arch,
        &ws,
        &data,
        file.loss,
        CertificateOptions {
            tol_factor: file.tol_factor,
            exactness_tol: file.exactness_tol,
        },
    )?;
    let report = DiagnosticsReport::new(
        cert,
        classify_layers(&arch, &ws, &probe)?,
        width_advisory(&arch, file.data_dim)?,
        lipschitz_estimates(&arch, &ws, &data.inputs)?,
    );
    log::info!("verdict {:?}, rank {} of {}", report.verdict, report.rank_p, report.required);
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("diagnostics.json"), &report)?;
    println!("{}", args.out.display());
    Ok(())
}

/// Runs the suite and prints one line per oracle. Returns whether all passed.
pub fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let mut file = match &args.config {
        Some(p) => load::<VerifyFile>(p)?,
        None => VerifyFile::default(),
    };
    if let Some(seed) = args.seed {
        file.suite.seed = seed;
    }
    file.check()?;
    if let Some(f) = file.suite.fault {
        log::warn!("fault injection active: {f:?}");
    }
    let report = run_oracle_suite(&file.suite)?;
    for r in &report.results {
        println!(
            "{:<20} {} checked={:<4} max_error={:.3e} tol={:.0e}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.checked,
            r.max_error,
            r.tolerance
        );
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("oracle_report.json"), &report)?;
    }
    let failing: Vec<&str> = report.results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if !failing.is_empty() {
        eprintln!("failing oracles: {}", failing.join(", "));
    }
    Ok(failing.is_empty())
}

fn reseed(seeds: &mut Vec<u64>, start: Option<u64>) {
    if let Some(s) = start {
        *seeds = (0..seeds.len() as u64).map(|i| s + i).collect();
    }
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<PathBuf> {
    let name = ExperimentName::parse(&args.name)?;
    let mut file = match &args.config {
        Some(p) => load::<ExperimentFile>(p)?,
        None => ExperimentFile::default(),
    };
    reseed(&mut file.four_region.seeds, args.seed);
    reseed(&mut file.figure_eight.seeds, args.seed);
    reseed(&mut file.swiss_roll.seeds, args.seed);
    file.check()?;
    if args.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let report: ExperimentReport = match name {
        ExperimentName::FourRegion => run_four_region(&file.four_region, args.jobs)?.report,
        ExperimentName::FigureEight => run_slope_sweep(&file.figure_eight, args.jobs)?.report,
        ExperimentName::SwissRoll => run_representation_compare(&file.swiss_roll, args.jobs)?.report,
    };
    let dir = report.write_artifacts(&args.out)?;
    println!("{}", dir.display());
    Ok(dir)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = init_logging() {
        eprintln!("error: {e}");
        return 2;
    }
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Diagnose(a) => cmd_diagnose(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Experiment(a) => cmd_experiment(a).map(|_| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
