use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{ModelGraph, PredictionPart};
use crate::data::{LabeledBatch, TrainingView};
use crate::error::{MdalError, Result};
use crate::nn::{
    optimizer_step, EarlyStopMonitor, LrScheduler, OptimizerKind, OptimizerState, StopDecision, TrainSchedule,
};

/// Training hyperparameters for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub lr_decay: Option<f64>,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub patience: usize,
    pub max_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Validation micro-accuracy after each epoch.
    pub val_history: Vec<f64>,
    pub best_val: Option<f64>,
    pub stopped_early: bool,
    pub lr_decays: usize,
}

/// Fraction of rows whose argmax prediction matches the label.
pub fn batch_accuracy(model: &ModelGraph, batch: &LabeledBatch, part: PredictionPart) -> Result<f64> {
    if batch.is_empty() {
        return Err(MdalError::Evaluation("accuracy of an empty set".into()));
    }
    let pred = model.predict_labels(&batch.x, &batch.domains, part)?;
    let correct = pred.iter().zip(&batch.labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / batch.len() as f64)
}

/// Trains `model` in place and leaves it at the best validation snapshot.
///
/// Each step takes a shuffled mini-batch of labeled training rows from all
/// domains; models with a discriminator also draw a mixed labeled+unlabeled
/// batch of the same size for the adversarial term.
pub fn fit<R: Rng + ?Sized>(
    model: &mut ModelGraph,
    view: &TrainingView,
    config: &FitConfig,
    rng: &mut R,
) -> Result<FitReport> {
    if config.batch_size == 0 {
        return Err(MdalError::Config("batch size must be at least 1".into()));
    }
    if view.domain_count() != model.domain_count() {
        return Err(MdalError::Training(format!(
            "view has {} domains, model expects {}",
            view.domain_count(),
            model.domain_count()
        )));
    }
    for k in 0..model.domain_count() {
        if !view.train.domains.contains(&k) {
            return Err(MdalError::Training(format!("domain {k} has no labeled training instances")));
        }
        if !view.val.domains.contains(&k) {
            return Err(MdalError::Training(format!("domain {k} has no validation instances")));
        }
    }
    let schedule = TrainSchedule::new(config.lr_decay, config.patience, config.max_epochs)?;
    let mut report = FitReport {
        val_history: Vec::new(),
        best_val: None,
        stopped_early: false,
        lr_decays: 0,
    };
    if schedule.max_epochs == 0 {
        return Ok(report);
    }
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, config.weight_decay)?;
    let mut monitor = EarlyStopMonitor::new(schedule.patience);
    let mut lr = LrScheduler::new(&schedule);
    let adversarial = model.kind().has_discriminator();
    let mut order: Vec<usize> = (0..view.train.len()).collect();

    for _epoch in 0..schedule.max_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = view.train.select(chunk);
            let (_, mut grads) = model.supervised_loss(&batch)?;
            if adversarial {
                let mixed = view.sample_mixed(config.batch_size, rng);
                let (_, adv) = model.adversarial_loss(&mixed)?;
                grads.add_assign(&adv);
            }
            optimizer_step(model.layers_mut(), &grads.layers, &mut opt)?;
        }
        let acc = batch_accuracy(model, &view.val, PredictionPart::Whole)?;
        report.val_history.push(acc);
        let improved = acc > monitor.best_value();
        if let Some(factor) = lr.observe(improved) {
            opt.learning_rate *= factor;
        }
        if monitor.update(acc, model.layers_mut()) == StopDecision::Stop {
            report.stopped_early = true;
            break;
        }
    }
    monitor.restore_best(model.layers_mut());
    report.best_val = Some(monitor.best_value());
    report.lr_decays = lr.decays_applied();
    Ok(report)
}
