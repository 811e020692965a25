use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::acquisition::StrategyKind;
use crate::error::{MdalError, Result};
use crate::models::ArchitectureKind;

/// Per-repeat AULC values of one model × strategy cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub model: ArchitectureKind,
    pub strategy: StrategyKind,
    pub aulc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportCell {
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
    /// Largest mean in the table (all tied cells are flagged).
    pub best: bool,
}

/// AULC matrix: rows are strategies, columns are models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub models: Vec<ArchitectureKind>,
    pub strategies: Vec<StrategyKind>,
    pub cells: BTreeMap<(StrategyKind, ArchitectureKind), ReportCell>,
}

pub fn report_table(cells: &[CellSummary]) -> Result<ReportTable> {
    if cells.is_empty() {
        return Err(MdalError::Evaluation("no results to report".into()));
    }
    let mut out = BTreeMap::new();
    for c in cells {
        if c.aulc.is_empty() {
            return Err(MdalError::Evaluation(format!("cell {}/{} has no runs", c.model, c.strategy)));
        }
        let n = c.aulc.len() as f64;
        let mean = c.aulc.iter().sum::<f64>() / n;
        let std = if c.aulc.len() > 1 {
            (c.aulc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let cell = ReportCell {
            mean,
            std,
            repeats: c.aulc.len(),
            best: false,
        };
        if out.insert((c.strategy, c.model), cell).is_some() {
            return Err(MdalError::Input(format!("duplicate cell {}/{}", c.model, c.strategy)));
        }
    }
    let top = out.values().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
    for c in out.values_mut() {
        c.best = c.mean == top;
    }
    let models = ArchitectureKind::ALL
        .into_iter()
        .filter(|m| out.keys().any(|(_, mm)| mm == m))
        .collect();
    let strategies = StrategyKind::ALL
        .into_iter()
        .filter(|s| out.keys().any(|(ss, _)| ss == s))
        .collect();
    Ok(ReportTable {
        models,
        strategies,
        cells: out,
    })
}

impl ReportTable {
    pub fn get(&self, strategy: StrategyKind, model: ArchitectureKind) -> Option<&ReportCell> {
        self.cells.get(&(strategy, model))
    }

    /// Long-format CSV, one line per present cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy,model,mean,std,repeats,best\n");
        for st in &self.strategies {
            for m in &self.models {
                if let Some(c) = self.get(*st, *m) {
                    let _ = writeln!(s, "{st},{m},{:.6},{:.6},{},{}", c.mean, c.std, c.repeats, c.best);
                }
            }
        }
        s
    }

    /// Aligned matrix; the best cells carry a trailing `*` and missing cells stay blank.
    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("strategy".to_string())
            .chain(self.models.iter().map(|m| m.to_string()))
            .collect()];
        for st in &self.strategies {
            let mut row = vec![st.to_string()];
            for m in &self.models {
                row.push(match self.get(*st, *m) {
                    Some(c) => format!("{:.4}±{:.4}{}", c.mean, c.std, if c.best { "*" } else { " " }),
                    None => String::new(),
                });
            }
            grid.push(row);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(s, "{}", cells.join("  ").trim_end());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(m: ArchitectureKind, s: StrategyKind, v: &[f64]) -> CellSummary {
        CellSummary {
            model: m,
            strategy: s,
            aulc: v.to_vec(),
        }
    }

    #[test]
    fn single_cell_flagged() {
        let t = report_table(&[cell(ArchitectureKind::Man, StrategyKind::Badge, &[0.7])]).unwrap();
        let c = t.get(StrategyKind::Badge, ArchitectureKind::Man).unwrap();
        assert!(c.best && c.std == 0.0);
        assert_eq!(t.to_text().lines().count(), 2);
    }

    #[test]
    fn ties_and_missing() {
        let t = report_table(&[
            cell(ArchitectureKind::Man, StrategyKind::Random, &[0.25, 0.75]),
            cell(ArchitectureKind::Dann, StrategyKind::Random, &[0.5]),
            cell(ArchitectureKind::Dann, StrategyKind::Egl, &[0.25]),
        ])
        .unwrap();
        assert!(t.get(StrategyKind::Random, ArchitectureKind::Man).unwrap().best);
        assert!(t.get(StrategyKind::Random, ArchitectureKind::Dann).unwrap().best);
        assert!(!t.get(StrategyKind::Egl, ArchitectureKind::Dann).unwrap().best);
        assert!(t.get(StrategyKind::Egl, ArchitectureKind::Man).is_none());
        let m = t.get(StrategyKind::Random, ArchitectureKind::Man).unwrap();
        assert!(m.mean == 0.5 && (m.std - 0.125f64.sqrt()).abs() < 1e-15);
        assert_eq!(t.to_csv().lines().count(), 4);
        assert!(report_table(&[]).is_err());
    }
}
