use rayon::prelude::*;
use serde::Serialize;

use super::{test_accuracy, LearningCurve};
use crate::data::MultiDomainPool;
use crate::engine::{init_experiment, run_iteration, ExperimentConfig, ExperimentState, IterationStatus};
use crate::error::{MdalError, Result};
use crate::models::PredictionPart;

/// Test accuracy of the whole model and of its shared-only and private-only
/// parts, averaged over repeats, plus the per-repeat curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub whole: LearningCurve,
    pub shared: LearningCurve,
    pub private: LearningCurve,
    pub per_repeat: Vec<[LearningCurve; 3]>,
}

fn checkpoint(state: &ExperimentState, out: &mut [Vec<(f64, f64)>; 3]) -> Result<()> {
    let cost = state.cost() as f64;
    for (curve, part) in out
        .iter_mut()
        .zip([PredictionPart::Whole, PredictionPart::Shared, PredictionPart::Private])
    {
        curve.push((cost, test_accuracy(&state.model, &state.pool, part)?.micro));
    }
    Ok(())
}

fn ablation_repeat(config: &ExperimentConfig, repeat: usize, base: &MultiDomainPool) -> Result<[LearningCurve; 3]> {
    let mut state = init_experiment(config, repeat, base)?;
    let mut pts: [Vec<(f64, f64)>; 3] = Default::default();
    checkpoint(&state, &mut pts)?;
    while run_iteration(&mut state, config)? != IterationStatus::PoolExhausted {
        if state.rows.len() > pts[0].len() {
            checkpoint(&state, &mut pts)?;
        }
        if state.cost() >= config.budget {
            break;
        }
    }
    let [a, b, c] = pts;
    Ok([LearningCurve::new(a)?, LearningCurve::new(b)?, LearningCurve::new(c)?])
}

/// Runs the standard experiment for a share-private architecture and scores
/// each part at every checkpoint.
pub fn ablation_report(config: &ExperimentConfig, base: &MultiDomainPool, workers: usize) -> Result<AblationReport> {
    if !config.architecture.is_share_private() {
        return Err(MdalError::Config(format!(
            "the shared/private ablation needs man or can, got {}",
            config.architecture
        )));
    }
    let one = |r: usize| ablation_repeat(config, r, base);
    let per_repeat: Vec<[LearningCurve; 3]> = if workers <= 1 {
        (0..config.repeats).map(one).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MdalError::Config(format!("cannot start {workers} workers: {e}")))?
            .install(|| (0..config.repeats).into_par_iter().map(one).collect::<Result<_>>())?
    };
    let column = |i: usize| per_repeat.iter().map(|c| c[i].clone()).collect::<Vec<_>>();
    Ok(AblationReport {
        whole: LearningCurve::mean(&column(0))?,
        shared: LearningCurve::mean(&column(1))?,
        private: LearningCurve::mean(&column(2))?,
        per_repeat,
    })
}
