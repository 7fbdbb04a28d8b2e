//! `ffrsim` command line: single runs, four-case comparisons, and
//! availability sweeps.
//!
//! Exit codes: 0 success, 1 configuration/validation failure, 2 runtime
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ffrsim::harness::{run_compare, sweep_availability, write_outputs, HarnessError};
use ffrsim::metrics::metrics_report;
use ffrsim::resource::ResourceClass;
use ffrsim::scenario::{build_case, load_config, ConfigError, ScenarioConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "ffrsim", version, about = "Grid frequency response simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Scenario file (JSON); the bundled default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the integration step, seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulation horizon, seconds.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one case and write its trajectory and metrics.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Coordination case 1-4; the scenario's own case when omitted.
        #[arg(long)]
        case: Option<u8>,
    },
    /// Run all four coordination cases and write the comparison table.
    Compare {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Scale one resource class's availability and tabulate the metrics.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Resource class to scale.
        #[arg(long, value_enum)]
        class: ClassArg,
        /// Comma-separated scale factors in [0, 1].
        #[arg(long, value_delimiter = ',')]
        scales: Vec<f64>,
        /// Case to rerun at each scale.
        #[arg(long, default_value_t = 4)]
        case: u8,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Bess,
    Datacenter,
    Ev,
}

impl From<ClassArg> for ResourceClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Bess => ResourceClass::Bess,
            ClassArg::Datacenter => ResourceClass::DataCenter,
            ClassArg::Ev => ResourceClass::EvFleet,
        }
    }
}

fn load_scenario(common: &CommonOpts) -> Result<ScenarioConfig, ConfigError> {
    let mut config = match &common.config {
        Some(path) => {
            let loaded = load_config(path)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            loaded.config
        }
        None => ScenarioConfig::bundled_default(),
    };
    if let Some(dt) = common.dt {
        config.sim.dt_s = dt;
    }
    if let Some(h) = common.horizon {
        config.sim.horizon_s = h;
    }
    if common.dt.is_some() || common.horizon.is_some() {
        config.validate().map_err(ConfigError::Validation)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), MainError> {
    match cli.command {
        Command::Run { common, case } => {
            let base = load_scenario(&common)?;
            let cfg = match case {
                Some(c) => build_case(&base, c)?,
                None => base,
            };
            let traj = ffrsim::run_simulation(&cfg)?;
            let report = metrics_report(&traj, &cfg.metrics, cfg.case_id)?;
            let stem = format!("case{}", cfg.case_id);
            write_outputs(&traj, &report, cfg.metrics.rocof_window_s, &common.out, &stem)?;
            print_report_line(&report);
            Ok(())
        }
        Command::Compare { common } => {
            let cfg = load_scenario(&common)?;
            let results = run_compare(&cfg, &common.out)?;
            for report in &results.reports {
                print_report_line(report);
            }
            Ok(())
        }
        Command::Sweep {
            common,
            class,
            scales,
            case,
        } => {
            let cfg = load_scenario(&common)?;
            let spec = SweepSpec {
                target_class: class.into(),
                scale_factors: scales,
                base_case: case,
            };
            if spec.scale_factors.is_empty() {
                return Err(MainError::BadArgs("at least one --scales value required".into()));
            }
            if spec.scale_factors.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(MainError::BadArgs("scale factors must be in [0, 1]".into()));
            }
            let rows = sweep_availability(&cfg, &spec, Some(&common.out))?;
            for row in &rows {
                println!(
                    "scale {:>5.2}: nadir {:.4} Hz, rocof {:+.4} Hz/s, recovery {}",
                    row.scale,
                    row.report.nadir_hz,
                    row.report.max_rocof_hz_per_s,
                    row.report
                        .recovery_time_s
                        .map(|t| format!("{t:.2} s"))
                        .unwrap_or_else(|| "none".into())
                );
            }
            Ok(())
        }
    }
}

fn print_report_line(report: &ffrsim::MetricsReport) {
    println!(
        "case {}: nadir {:.4} Hz at {:.2} s, rocof {:+.4} Hz/s, recovery {}, secondary dip {}",
        report.case_id,
        report.nadir_hz,
        report.nadir_time_s,
        report.max_rocof_hz_per_s,
        report
            .recovery_time_s
            .map(|t| format!("{t:.2} s"))
            .unwrap_or_else(|| "none".into()),
        report
            .secondary_dip
            .as_ref()
            .map(|d| format!("{:.3} Hz at {:.2} s", d.depth_hz, d.time_s))
            .unwrap_or_else(|| "none".into()),
    );
}

#[derive(Debug, thiserror::Error)]
enum MainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Sim(#[from] ffrsim::engine::SimError),
    #[error(transparent)]
    Metrics(#[from] ffrsim::metrics::MetricsError),
    #[error("{0}")]
    BadArgs(String),
}

impl MainError {
    fn exit_code(&self) -> u8 {
        match self {
            // validation and argument problems
            MainError::Config(_) | MainError::BadArgs(_) => 1,
            MainError::Harness(HarnessError::Config(_)) => 1,
            // runtime failures
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
