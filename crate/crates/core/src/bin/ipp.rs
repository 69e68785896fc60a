//! `ipp run <spec>`, `ipp bench <suite>`, `ipp validate`.
//!
//! Relative output directories are placed under `$IPP_OUTPUT_ROOT` when it is set.
//! Exit status: 0 on success, 2 for an invalid spec or suite, 1 for any other failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anomaly_ipp::experiment::{run_experiment, ExperimentReport, ExperimentSpec, RunOptions, Suite, DEFAULT_REPLICATES};
use anomaly_ipp::metrics::Metric;
use anomaly_ipp::validation::{run_all, Fault};
use anomaly_ipp::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ipp", about = "Likelihood-weighted informative path planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML spec file.
    Run {
        spec: PathBuf,
        /// Override a spec field, e.g. `--set mission.duration=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a predefined suite: static-uniform, static-gaussian, dynamic-adversarial or grid.
    Bench {
        suite: String,
        #[arg(long, default_value_t = DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
    },
    /// Check the implementation against independent oracles.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { spec, overrides, jobs } => ExperimentSpec::from_file(&spec, &overrides)
            .and_then(|s| run_experiment(&s, &RunOptions::from_env(jobs)))
            .map(|r| print_report(&r)),
        Command::Bench {
            suite,
            replicates,
            jobs,
            seed_base,
        } => bench(&suite, replicates, jobs, seed_base),
        Command::Validate => return validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn bench(suite: &str, replicates: usize, jobs: Option<usize>, seed_base: u64) -> anomaly_ipp::Result<()> {
    let suite: Suite = suite.parse()?;
    let opts = RunOptions::from_env(jobs);
    let specs = suite.experiments(replicates, seed_base);
    for s in &specs {
        s.validate()?;
    }
    for s in &specs {
        println!("== {}", s.name);
        print_report(&run_experiment(s, &opts)?);
    }
    Ok(())
}

fn print_report(r: &ExperimentReport) {
    println!("{:<10} {:>12} {:>12} {:>12} {:>12}", "acq", "rmse", "pdfe", "dist", "regret");
    for res in &r.results {
        let v: Vec<String> = Metric::ALL
            .iter()
            .map(|m| res.final_median(*m).map_or("-".into(), |x| format!("{x:.4e}")))
            .collect();
        println!("{:<10} {:>12} {:>12} {:>12} {:>12}", res.kind.to_string(), v[0], v[1], v[2], v[3]);
    }
    println!("artifacts in {}", r.output_dir.display());
}

fn validate() -> ExitCode {
    let fault = match std::env::var("IPP_VALIDATE_FAULT") {
        Ok(s) if !s.is_empty() => match s.parse::<Fault>() {
            Ok(f) => Some(f),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        _ => None,
    };
    let results = run_all(fault);
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
