//! On-disk layout of a results directory.
//!
//! ```text
//! <out>/config.json                        resolved config of the run
//! <out>/sweep.json                         model and strategy lists (sweeps only)
//! <out>/cells/<model>__<strategy>/runs.jsonl
//! <out>/cells/<model>__<strategy>/aggregate.csv
//! <out>/cells/<model>__<strategy>/curve.csv, curve.svg   (plot)
//! <out>/report.csv, report.txt                           (report)
//! ```

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use mdal_core::acquisition::StrategyKind;
use mdal_core::engine::{ExperimentConfig, ExperimentResult, RunRecord, RunRow};
use mdal_core::models::ArchitectureKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

const OWNED: [&str; 5] = ["config.json", "sweep.json", "cells", "report.csv", "report.txt"];

/// Model and strategy lists of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub models: Vec<ArchitectureKind>,
    pub strategies: Vec<StrategyKind>,
}

pub struct ResultsStore {
    root: PathBuf,
}

/// Runs of one model × strategy cell read back from disk.
pub struct StoredCell {
    pub model: ArchitectureKind,
    pub strategy: StrategyKind,
    pub dir: PathBuf,
    pub runs: Vec<RunRecord>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl ResultsStore {
    /// Prepares `root` for a new run. A non-empty directory is refused unless
    /// `force` is set, in which case only the entries this store writes are removed.
    pub fn create(root: &Path, force: bool) -> Result<Self, CliError> {
        if root.exists() {
            let non_empty = fs::read_dir(root).map_err(|e| io_err(root, e))?.next().is_some();
            if non_empty && !force {
                return Err(CliError::Config(format!(
                    "output directory {} is not empty; pass --force to overwrite",
                    root.display()
                )));
            }
            for name in OWNED {
                let p = root.join(name);
                if p.is_dir() {
                    fs::remove_dir_all(&p).map_err(|e| io_err(&p, e))?;
                } else if p.exists() {
                    fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
                }
            }
        }
        fs::create_dir_all(root.join("cells")).map_err(|e| io_err(root, e))?;
        Ok(ResultsStore { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Result<Self, CliError> {
        if !root.join("cells").is_dir() {
            return Err(CliError::Runtime(format!("{} holds no results", root.display())));
        }
        Ok(ResultsStore { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cell_dir(&self, model: ArchitectureKind, strategy: StrategyKind) -> PathBuf {
        self.root.join("cells").join(format!("{model}__{strategy}"))
    }

    pub fn write_config(&self, config: &ExperimentConfig) -> Result<(), CliError> {
        let path = self.root.join("config.json");
        let text = serde_json::to_string_pretty(config).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    pub fn write_sweep(&self, plan: &SweepPlan) -> Result<(), CliError> {
        let path = self.root.join("sweep.json");
        let text = serde_json::to_string_pretty(plan).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    pub fn write_cell(&self, config: &ExperimentConfig, result: &ExperimentResult) -> Result<PathBuf, CliError> {
        let dir = self.cell_dir(config.architecture, config.strategy);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        result.write_jsonl(&dir.join("runs.jsonl")).map_err(|e| io_err(&dir, e))?;
        result
            .write_aggregate_csv(&dir.join("aggregate.csv"))
            .map_err(|e| io_err(&dir, e))?;
        Ok(dir)
    }

    /// Every cell with at least one row, ordered by model then strategy.
    pub fn read_cells(&self) -> Result<Vec<StoredCell>, CliError> {
        let cells_dir = self.root.join("cells");
        let mut out = Vec::new();
        for entry in fs::read_dir(&cells_dir).map_err(|e| io_err(&cells_dir, e))? {
            let dir = entry.map_err(|e| io_err(&cells_dir, e))?.path();
            let Some(name) = dir.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
                continue;
            };
            let Some((m, s)) = name.split_once("__") else {
                continue;
            };
            let (Ok(model), Ok(strategy)) = (m.parse::<ArchitectureKind>(), s.parse::<StrategyKind>()) else {
                continue;
            };
            let path = dir.join("runs.jsonl");
            if !path.exists() {
                continue;
            }
            let runs = read_runs(&path)?;
            if !runs.is_empty() {
                out.push(StoredCell { model, strategy, dir, runs });
            }
        }
        out.sort_by_key(|c| (c.model, c.strategy));
        if out.is_empty() {
            return Err(CliError::Runtime(format!("no results under {}", cells_dir.display())));
        }
        Ok(out)
    }
}

/// Groups JSON-lines rows back into per-repeat records ordered by repeat.
pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut by_repeat: std::collections::BTreeMap<usize, Vec<RunRow>> = Default::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RunRow =
            serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?;
        by_repeat.entry(row.repeat).or_default().push(row);
    }
    Ok(by_repeat
        .into_iter()
        .map(|(repeat, mut rows)| {
            rows.sort_by_key(|r| r.iteration);
            RunRecord {
                repeat,
                rows,
                exhausted: false,
            }
        })
        .collect())
}
