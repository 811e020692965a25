use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdal_cli::config::parse_list;
use mdal_cli::{cmd_plot, cmd_report, cmd_run, cmd_selftest, cmd_sweep, load_config, CliError, Overrides};
use mdal_core::acquisition::StrategyKind;
use mdal_core::models::ArchitectureKind;

#[derive(Parser)]
#[command(name = "mdal", version, about = "Multi-domain active learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset applied before the config file
    #[arg(long)]
    preset: Option<String>,
    /// Results directory (overrides the config's "out")
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite a non-empty results directory
    #[arg(long)]
    force: bool,
    #[arg(long, env = "MDAL_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated architectures
    #[arg(long)]
    models: Option<String>,
    /// Comma-separated strategies
    #[arg(long)]
    strategies: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one model × strategy cell
    Run(RunArgs),
    /// Run the model × strategy grid (all 30 cells by default)
    Sweep(RunArgs),
    /// Write the AULC table of a results directory
    Report { dir: PathBuf },
    /// Write per-cell curve CSVs and SVG plots
    Plot { dir: PathBuf },
    /// Run the oracle checks; with a config, also the batch-diversity trend
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
}

fn lists(args: &RunArgs) -> Result<(Vec<ArchitectureKind>, Vec<StrategyKind>), CliError> {
    let models = match &args.models {
        Some(s) => parse_list(s)?,
        None => Vec::new(),
    };
    let strategies = match &args.strategies {
        Some(s) => parse_list(s)?,
        None => Vec::new(),
    };
    Ok((models, strategies))
}

fn run_like(args: RunArgs, sweep: bool) -> Result<(), CliError> {
    let (mut models, mut strategies) = lists(&args)?;
    if sweep {
        if models.is_empty() {
            models = ArchitectureKind::ALL.to_vec();
        }
        if strategies.is_empty() {
            strategies = StrategyKind::ALL.to_vec();
        }
    } else if models.len() > 1 || strategies.len() > 1 {
        return Err(CliError::Config("run takes a single model and strategy; use sweep for more".into()));
    }
    let overrides = Overrides {
        preset: args.preset.clone(),
        seed: args.seed,
        architecture: models.first().copied(),
        strategy: strategies.first().copied(),
    };
    let file = load_config(args.config.as_deref(), &overrides)?;
    let out = args
        .out
        .or(file.out)
        .ok_or_else(|| CliError::Config("no output directory: pass --out DIR or set \"out\"".into()))?;
    if sweep {
        cmd_sweep(&file.experiment, &models, &strategies, &out, args.force, args.workers, true)
    } else {
        cmd_run(&file.experiment, &out, args.force, args.workers)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => run_like(a, false),
        Command::Sweep(a) => run_like(a, true),
        Command::Report { dir } => {
            print!("{}", cmd_report(&dir)?);
            Ok(())
        }
        Command::Plot { dir } => {
            for p in cmd_plot(&dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Selftest { config, preset } => {
            let file = if config.is_some() || preset.is_some() {
                Some(load_config(
                    config.as_deref(),
                    &Overrides {
                        preset,
                        architecture: Some(ArchitectureKind::Man),
                        strategy: Some(StrategyKind::Uncertainty),
                        ..Default::default()
                    },
                )?)
            } else {
                None
            };
            let outcomes = cmd_selftest(file.as_ref().map(|f| &f.experiment))?;
            let mut hard_fail = false;
            for c in &outcomes {
                let tag = match (c.passed, c.soft) {
                    (true, _) => "PASS",
                    (false, true) => "WARN",
                    (false, false) => {
                        hard_fail = true;
                        "FAIL"
                    }
                };
                println!("{tag} {:<10} {}", c.name, c.detail);
            }
            if hard_fail {
                Err(CliError::Runtime("selftest failed".into()))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
