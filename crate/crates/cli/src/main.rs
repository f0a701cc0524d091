use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use equidyn_cli::{
    emit_report, replay, run_experiment, CliError, ExperimentConfig, ExperimentKind, ExperimentReport, ReportFormat,
};

#[derive(Parser)]
#[command(name = "equidyn", version, about = "Equidistribution experiments for rational maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Proximity m(f^n, a) against its limit.
    Proximity(RunArgs),
    /// Preimage divisors against the equilibrium measure.
    Equidist(RunArgs),
    /// Periodic-point divisors.
    Periodic(RunArgs),
    /// Level sets of the derivative of f^n.
    Derivative(RunArgs),
    /// Parameter-space level sets for z^d + c.
    Parameter(RunArgs),
    /// Green function and tangent-bound checks on plane domains.
    Selberg(RunArgs),
    /// Orbit-distance clusters of periodic points.
    HypothesisH(RunArgs),
    /// Green-function identity on a component of {|f^n - a| < s}.
    Myrberg(RunArgs),
    /// Rerun a stored report and compare its CSV byte for byte.
    Replay {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key = value file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.csv, report.json and plots.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<u64>,
    /// Largest divisor degree d^n allowed.
    #[arg(long)]
    budget: Option<usize>,
    /// Extra `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let c = ExperimentConfig::parse(&std::fs::read_to_string(path)?)?;
            if c.kind != kind {
                return Err(CliError::Config(format!("config is for `{}`, not `{kind}`", c.kind)));
            }
            c
        }
        None => ExperimentConfig::new(kind),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = &args.out {
        config.out = o.clone();
    }
    if let Some(s) = args.samples {
        config.samples = s;
    }
    if let Some(b) = args.budget {
        config.budget = b;
    }
    Ok(config)
}

fn write_all(report: &ExperimentReport, dir: &Path) -> Result<(), CliError> {
    for format in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg] {
        if let Some(path) = emit_report(report, format, dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn summarize(report: &ExperimentReport) {
    print!("{}", report.to_csv());
    for r in report.failures() {
        if let equidyn_cli::Outcome::Failed { error } = &r.outcome {
            eprintln!("task {} (n = {}) failed: {error}", r.index, r.n);
        }
    }
    eprintln!(
        "{} tasks in {:.2}s, {}",
        report.records.len(),
        report.wall_clock_seconds,
        if report.all_pass() { "all pass" } else { "some fail" }
    );
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (kind, args) = match cli.command {
        Command::Replay { report, out } => {
            let old = ExperimentReport::from_json(&std::fs::read_to_string(&report)?)?;
            let new = replay(&old)?;
            if let Some(dir) = out {
                write_all(&new, &dir)?;
            }
            let same = old.to_csv() == new.to_csv();
            eprintln!("replay {}", if same { "matches" } else { "differs" });
            return Ok(same);
        }
        Command::Proximity(a) => (ExperimentKind::Proximity, a),
        Command::Equidist(a) => (ExperimentKind::Equidist, a),
        Command::Periodic(a) => (ExperimentKind::Periodic, a),
        Command::Derivative(a) => (ExperimentKind::Derivative, a),
        Command::Parameter(a) => (ExperimentKind::Parameter, a),
        Command::Selberg(a) => (ExperimentKind::Selberg, a),
        Command::HypothesisH(a) => (ExperimentKind::HypothesisH, a),
        Command::Myrberg(a) => (ExperimentKind::Myrberg, a),
    };
    let config = load(kind, &args)?;
    let report = run_experiment(&config)?;
    write_all(&report, &config.out)?;
    summarize(&report);
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
