use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acquisition::StrategyKind;
use crate::data::{SyntheticSpec, DEFAULT_SPLIT};
use crate::error::{MdalError, Result};
use crate::models::{ArchitectureKind, FitConfig};
use crate::nn::OptimizerKind;

/// Where instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    /// Path to a dataset manifest JSON.
    Manifest(PathBuf),
}

fn default_split() -> [f64; 3] {
    DEFAULT_SPLIT
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_max_epochs() -> usize {
    100
}

/// Everything one experiment cell needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub architecture: ArchitectureKind,
    pub strategy: StrategyKind,
    pub dataset: DatasetSpec,
    /// Train/validation/test ratios of the per-domain pool split.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub lr_decay: Option<f64>,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub patience: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Share of each domain's labeled set held out for early stopping.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    pub lambda: f64,
    pub budget: usize,
    pub initial_size: usize,
    pub al_batch: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("budget", self.budget),
            ("initial_size", self.initial_size),
            ("al_batch", self.al_batch),
            ("repeats", self.repeats),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(MdalError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.initial_size > self.budget {
            return Err(MdalError::Config(format!(
                "initial_size {} exceeds budget {}",
                self.initial_size, self.budget
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MdalError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(MdalError::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if let Some(d) = self.lr_decay {
            if !(d > 0.0 && d <= 1.0) {
                return Err(MdalError::Config(format!("lr_decay must lie in (0, 1], got {d}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(MdalError::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(MdalError::Config(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        if self.split.iter().any(|r| !(*r > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MdalError::Config(format!("split ratios must be positive and sum to 1, got {:?}", self.split)));
        }
        if let DatasetSpec::Synthetic(s) = &self.dataset {
            s.validate().map_err(|e| MdalError::Config(e.to_string()))?;
        }
        if (self.budget - self.initial_size) % self.al_batch != 0 {
            log::info!(
                "budget {} is not initial_size {} plus a whole number of batches of {}; the last batch is partial",
                self.budget,
                self.initial_size,
                self.al_batch
            );
        }
        Ok(())
    }

    /// AL rounds after the warm start: ⌈(B − init) / b⌉.
    pub fn planned_iterations(&self) -> usize {
        (self.budget - self.initial_size).div_ceil(self.al_batch)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            patience: self.patience,
            max_epochs: self.max_epochs,
        }
    }
}
