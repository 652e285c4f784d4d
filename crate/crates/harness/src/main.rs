use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpdsym_harness::{parse_config, preset, run_experiment, ExperimentConfig, ExperimentKind, HarnessError, PRESET_NAMES};

/// Runs convergence, energy, symplecticity and ε-sweep experiments for the
/// cpdsym integrators.
///
/// Every flag can also be set through an environment variable with the
/// `CPDSYM_` prefix (for example `CPDSYM_JOBS=4`).
#[derive(Debug, Parser)]
#[command(name = "cpdsym", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true, env = "CPDSYM_CONFIG", value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config; see `cpdsym presets`.
    #[arg(long, global = true, env = "CPDSYM_PRESET", value_name = "NAME")]
    preset: Option<String>,
    /// Output directory [default: the config's `out_dir`, else `out/<name>`].
    #[arg(long, global = true, env = "CPDSYM_OUT_DIR", value_name = "PATH")]
    out_dir: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long, global = true, env = "CPDSYM_JOBS", value_name = "N")]
    jobs: Option<usize>,
    /// Seed for sampled phase-space points; overrides the config.
    #[arg(long, global = true, env = "CPDSYM_SEED", value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Errors against an oracle over the h grid, plus fitted slopes.
    Converge,
    /// Relative energy error along one trajectory per method.
    Energy,
    /// One-step symplecticity residuals in canonical coordinates.
    Symplectic,
    /// Error at fixed h across the ε grid, plus max/min ratios.
    SweepEps,
    /// The experiment named by the config's `experiment` field.
    Run,
    /// List presets, or print one as JSON.
    Presets { name: Option<String> },
}

fn load(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })?;
            parse_config(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(HarnessError::Config("pass --config PATH or --preset NAME".into())),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match &cli.command {
        Command::Converge => Some(ExperimentKind::Converge),
        Command::Energy => Some(ExperimentKind::Energy),
        Command::Symplectic => Some(ExperimentKind::Symplectic),
        Command::SweepEps => Some(ExperimentKind::SweepEps),
        Command::Run => None,
        Command::Presets { name: None } => {
            for n in PRESET_NAMES {
                println!("{n}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Presets { name: Some(n) } => {
            return match preset(n) {
                Ok(cfg) => {
                    println!("{}", cfg.to_json_pretty());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let mut cfg = match load(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let kind = kind.unwrap_or(cfg.experiment);
    cfg.experiment = kind;
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let out_dir = cli
        .common
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.name.as_deref().unwrap_or(kind.as_str())));
    match run_experiment(&cfg, kind, cli.common.jobs, &out_dir) {
        Ok(report) => {
            let md = &report.metadata;
            eprintln!(
                "{kind}: {} cells, {} failed, {} oracle failures, {:.2}s -> {}",
                md.cells.len(),
                md.failed_cells,
                md.failed_oracles,
                md.wall_clock_seconds,
                report.out_dir.display()
            );
            for c in md.cells.iter().filter(|c| !c.ok) {
                eprintln!("  failed {} eps={} h={}: {}", c.method, c.eps, c.h, c.error.as_deref().unwrap_or(""));
            }
            for o in md.oracles.iter().filter(|o| !o.passed) {
                eprintln!("  oracle eps={}: {}", o.eps, o.error.as_deref().unwrap_or(""));
            }
            if report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
