use crate::error::{MdalError, Result};

/// Early stopping and learning-rate decay policy for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub lr_decay: Option<f64>,
    pub decay_trigger: usize,
    pub max_decays: usize,
    pub patience: usize,
    pub max_epochs: usize,
}

impl TrainSchedule {
    /// Decay fires after `⌈patience / 2⌉` evaluations without improvement, at most twice.
    pub fn new(lr_decay: Option<f64>, patience: usize, max_epochs: usize) -> Result<Self> {
        if patience == 0 {
            return Err(MdalError::Config("early-stop patience must be ≥ 1".into()));
        }
        if let Some(f) = lr_decay {
            if !(f > 0.0 && f <= 1.0) {
                return Err(MdalError::Config(format!(
                    "learning-rate decay factor must lie in (0, 1], got {f}"
                )));
            }
        }
        Ok(Self {
            lr_decay,
            decay_trigger: patience.div_ceil(2),
            max_decays: 2,
            patience,
            max_epochs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the best validation metric and a snapshot of the parameters that produced it.
#[derive(Debug, Clone)]
pub struct EarlyStopMonitor<S> {
    best_value: f64,
    best_snapshot: Option<S>,
    stale_count: usize,
    patience: usize,
}

impl<S: Clone> EarlyStopMonitor<S> {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            best_value: f64::NEG_INFINITY,
            best_snapshot: None,
            stale_count: 0,
            patience,
        }
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    pub fn stale_count(&self) -> usize {
        self.stale_count
    }

    /// Feeds one validation result. Only strict improvements count.
    /// On `Stop`, `params` has already been restored to the best snapshot.
    pub fn update(&mut self, metric: f64, params: &mut S) -> StopDecision {
        if metric > self.best_value {
            self.best_value = metric;
            self.best_snapshot = Some(params.clone());
            self.stale_count = 0;
            return StopDecision::Continue;
        }
        self.stale_count += 1;
        if self.stale_count >= self.patience {
            self.restore_best(params);
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    /// Writes the best snapshot back into `params` (no-op before the first update).
    pub fn restore_best(&self, params: &mut S) {
        if let Some(best) = &self.best_snapshot {
            params.clone_from(best);
        }
    }
}

/// Step decay driven by stalled validation.
#[derive(Debug, Clone)]
pub struct LrScheduler {
    factor: Option<f64>,
    trigger: usize,
    max_decays: usize,
    stale: usize,
    applied: usize,
}

impl LrScheduler {
    pub fn new(schedule: &TrainSchedule) -> Self {
        Self {
            factor: schedule.lr_decay,
            trigger: schedule.decay_trigger.max(1),
            max_decays: schedule.max_decays,
            stale: 0,
            applied: 0,
        }
    }

    /// Returns the multiplier to apply to the learning rate after this evaluation, if any.
    pub fn observe(&mut self, improved: bool) -> Option<f64> {
        let factor = self.factor?;
        if improved {
            self.stale = 0;
            return None;
        }
        self.stale += 1;
        if self.stale >= self.trigger && self.applied < self.max_decays {
            self.stale = 0;
            self.applied += 1;
            Some(factor)
        } else {
            None
        }
    }

    pub fn decays_applied(&self) -> usize {
        self.applied
    }
}
