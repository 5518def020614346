use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_gd::bench::{run_experiment, run_validation_suite, ExperimentConfig, ExperimentKind, RunOptions};
use robust_gd::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "rgd-bench", version, about = "Robust gradient descent benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noisy quadratic risk minimization with exact excess risk
    Controlled(Common),
    /// Synthetic linear regression with a held-out test set
    Regression(Common),
    /// Logistic regression on a CSV dataset
    Classify(Common),
    /// Run the invariant suite
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: rgd-results]
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads, 0 for all cores
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn experiment(kind: ExperimentKind, args: &Common) -> Result<(), Error> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{kind} needs --config")))?;
    let config = ExperimentConfig::load(path)?;
    if config.kind() != kind {
        return Err(Error::Config(format!(
            "{} describes a {} experiment, not {kind}",
            path.display(),
            config.kind()
        )));
    }
    let opts = RunOptions {
        out_dir: args.out.clone().unwrap_or_else(|| PathBuf::from("rgd-results")),
        seed: args.seed,
        threads: args.threads,
    };
    let summary = run_experiment(&config, &opts)?;
    println!(
        "{kind}: {} cells ({} computed, {} resumed, {} failed) -> {}",
        summary.cells_total,
        summary.cells_computed,
        summary.cells_resumed,
        summary.failures.len(),
        opts.out_dir.display()
    );
    for f in &summary.failures {
        println!("  failed {} trial {}: {}", f.method, f.trial, f.error);
    }
    Ok(())
}

fn validate(args: &Common) -> Result<bool, Error> {
    let report = run_validation_suite();
    for c in &report.checks {
        println!("{} {:<50} {} ({:.2}s)", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail, c.seconds);
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(out.join("validation.json"), text + "\n")?;
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Controlled(a) => experiment(ExperimentKind::Controlled, a).map(|_| true),
        Command::Regression(a) => experiment(ExperimentKind::Regression, a).map(|_| true),
        Command::Classify(a) => experiment(ExperimentKind::Classify, a).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e @ (Error::Config(_) | Error::Dataset { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
