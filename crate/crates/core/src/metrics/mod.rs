//! Accuracy, learning curves, AULC and the post-hoc diagnostics.

mod ablation;
mod elbow;
mod plot;
mod probe;
mod report;

use serde::Serialize;

use crate::data::{InstanceHandle, MultiDomainPool, Split};
use crate::error::{MdalError, Result};
use crate::models::{ModelGraph, PredictionPart};

pub use ablation::{ablation_report, AblationReport};
pub use elbow::{elbow_diversity, elbow_point, kmeans_loss, DiversityReport};
pub use plot::{curve_csv, curve_svg};
pub use probe::{domain_probe, ProbeConfig};
pub use report::{report_table, CellSummary, ReportTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    /// Pooled correct / pooled count over all domains.
    pub micro: f64,
    pub per_domain: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Accuracy from per-row predictions and labels.
pub fn accuracy(pred: &[usize], labels: &[usize], domains: &[usize], domain_count: usize) -> Result<AccuracyReport> {
    if pred.len() != labels.len() || pred.len() != domains.len() {
        return Err(MdalError::Dimension(format!(
            "{} predictions, {} labels, {} domain ids",
            pred.len(),
            labels.len(),
            domains.len()
        )));
    }
    if pred.is_empty() {
        return Err(MdalError::Evaluation("accuracy of an empty set".into()));
    }
    let mut correct = vec![0usize; domain_count];
    let mut counts = vec![0usize; domain_count];
    for ((p, y), &d) in pred.iter().zip(labels).zip(domains) {
        if d >= domain_count {
            return Err(MdalError::Input(format!("domain id {d} out of range for {domain_count} domains")));
        }
        counts[d] += 1;
        correct[d] += usize::from(p == y);
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(MdalError::Evaluation(format!("domain {k} has no evaluation instances")));
    }
    Ok(AccuracyReport {
        micro: correct.iter().sum::<usize>() as f64 / pred.len() as f64,
        per_domain: correct.iter().zip(&counts).map(|(&c, &n)| c as f64 / n as f64).collect(),
        counts,
    })
}

/// Accuracy of `model` (or one of its parts) on the test split of every domain.
pub fn test_accuracy(model: &ModelGraph, pool: &MultiDomainPool, part: PredictionPart) -> Result<AccuracyReport> {
    let mut pred = Vec::new();
    let mut labels = Vec::new();
    let mut domains = Vec::new();
    for k in 0..pool.domain_count() {
        let idx = pool.indices(k, Split::Test);
        if idx.is_empty() {
            return Err(MdalError::Evaluation(format!(
                "domain {} has an empty test split",
                pool.domain(k).name()
            )));
        }
        let x = pool.domain(k).features().select_rows(&idx);
        pred.extend(model.predict_labels(&x, &vec![k; idx.len()], part)?);
        for i in idx {
            labels.push(pool.evaluation_label(InstanceHandle::new(k, i))?);
            domains.push(k);
        }
    }
    accuracy(&pred, &labels, &domains, pool.domain_count())
}

/// Accuracy against labeled cost, with strictly increasing costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    points: Vec<(f64, f64)>,
}

impl LearningCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(MdalError::Input(format!(
                    "learning curve costs must increase strictly, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(c, v)) = points.iter().find(|(c, v)| !c.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(MdalError::Input(format!("curve point ({c}, {v}) outside cost axis or [0, 1]")));
        }
        Ok(LearningCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<(f64, f64)> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }

    /// Pointwise mean of curves sharing the same cost checkpoints.
    pub fn mean(curves: &[LearningCurve]) -> Result<LearningCurve> {
        let first = curves
            .first()
            .ok_or_else(|| MdalError::Input("mean of no curves".into()))?;
        for c in curves {
            if c.points.len() != first.points.len() || c.points.iter().zip(&first.points).any(|(a, b)| a.0 != b.0) {
                return Err(MdalError::Input("curves have different cost checkpoints".into()));
            }
        }
        let n = curves.len() as f64;
        LearningCurve::new(
            first
                .points
                .iter()
                .enumerate()
                .map(|(i, &(c, _))| (c, curves.iter().map(|cv| cv.points[i].1).sum::<f64>() / n))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AulcScore {
    pub value: f64,
    pub cost_range: (f64, f64),
}

/// Trapezoidal area under the curve divided by its cost span.
pub fn aulc(curve: &LearningCurve) -> Result<AulcScore> {
    let p = curve.points();
    if p.len() < 2 {
        return Err(MdalError::Evaluation(format!(
            "area under a curve needs at least 2 points, got {}",
            p.len()
        )));
    }
    let area: f64 = p.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    let (lo, hi) = (p[0].0, p[p.len() - 1].0);
    Ok(AulcScore {
        value: area / (hi - lo),
        cost_range: (lo, hi),
    })
}
