use std::fs;
use std::path::{Path, PathBuf};

use mdal_core::acquisition::StrategyKind;
use mdal_core::engine::{aggregate, load_dataset, run_experiment_on, ExperimentConfig};
use mdal_core::metrics::{aulc, curve_csv, curve_svg, report_table, CellSummary, ReportTable};
use mdal_core::models::ArchitectureKind;
use mdal_core::selftest::{run_selftest, CheckOutcome};

use crate::store::{ResultsStore, SweepPlan};
use crate::CliError;

/// Runs one cell into `out`.
pub fn cmd_run(config: &ExperimentConfig, out: &Path, force: bool, workers: usize) -> Result<(), CliError> {
    cmd_sweep(config, &[config.architecture], &[config.strategy], out, force, workers, false)
}

/// Runs every model × strategy cell on the same dataset, splits and seeds.
/// Failed cells are reported after all others have been written.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    models: &[ArchitectureKind],
    strategies: &[StrategyKind],
    out: &Path,
    force: bool,
    workers: usize,
    write_plan: bool,
) -> Result<(), CliError> {
    if models.is_empty() || strategies.is_empty() {
        return Err(CliError::Config("sweep needs at least one model and one strategy".into()));
    }
    config.validate().map_err(CliError::from_core)?;
    let store = ResultsStore::create(out, force)?;
    store.write_config(config)?;
    if write_plan {
        store.write_sweep(&SweepPlan {
            models: models.to_vec(),
            strategies: strategies.to_vec(),
        })?;
    }
    let base = load_dataset(&config.dataset, config.seed).map_err(CliError::from_core)?;
    let mut failed = Vec::new();
    for &model in models {
        for &strategy in strategies {
            let cell = ExperimentConfig {
                architecture: model,
                strategy,
                ..config.clone()
            };
            log::info!("running {model}/{strategy} ({} repeats)", cell.repeats);
            let result = match run_experiment_on(&cell, &base, workers) {
                Ok(r) => r,
                Err(e) => {
                    log::error!("{model}/{strategy}: {e}");
                    failed.push(format!("{model}/{strategy}: {e}"));
                    continue;
                }
            };
            store.write_cell(&cell, &result)?;
            if let Some(f) = &result.failure {
                failed.push(format!("{model}/{strategy} repeat {}: {}", f.repeat, f.error));
            } else if let Some(last) = result.aggregate.last() {
                log::info!("{model}/{strategy}: final accuracy {:.4} ± {:.4}", last.mean, last.std);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{} cell(s) failed: {}", failed.len(), failed.join("; "))))
    }
}

/// AULC table of a results directory.
pub fn build_report(dir: &Path) -> Result<ReportTable, CliError> {
    let store = ResultsStore::open(dir)?;
    let mut cells = Vec::new();
    for c in store.read_cells()? {
        let aulc = c
            .runs
            .iter()
            .map(|r| r.curve().and_then(|cv| aulc(&cv)).map(|a| a.value))
            .collect::<mdal_core::Result<Vec<f64>>>()
            .map_err(CliError::from_core)?;
        cells.push(CellSummary {
            model: c.model,
            strategy: c.strategy,
            aulc,
        });
    }
    report_table(&cells).map_err(CliError::from_core)
}

/// Writes `report.csv` and `report.txt` and returns the text table.
pub fn cmd_report(dir: &Path) -> Result<String, CliError> {
    let table = build_report(dir)?;
    let text = table.to_text();
    write(&dir.join("report.csv"), &table.to_csv())?;
    write(&dir.join("report.txt"), &text)?;
    Ok(text)
}

/// Writes `curve.csv` and `curve.svg` into each cell directory.
pub fn cmd_plot(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let store = ResultsStore::open(dir)?;
    let mut written = Vec::new();
    for c in store.read_cells()? {
        let points = aggregate(&c.runs);
        write(&c.dir.join("curve.csv"), &curve_csv(&points))?;
        let svg = c.dir.join("curve.svg");
        write(&svg, &curve_svg(&points, &format!("{} / {}", c.model, c.strategy)))?;
        written.push(svg);
    }
    Ok(written)
}

/// Oracle checks, plus the soft diversity trend when `config` is given.
pub fn cmd_selftest(config: Option<&ExperimentConfig>) -> Result<Vec<CheckOutcome>, CliError> {
    match config {
        Some(c) => {
            let base = load_dataset(&c.dataset, c.seed).map_err(CliError::from_core)?;
            Ok(run_selftest(Some((c, &base))))
        }
        None => Ok(run_selftest(None)),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
