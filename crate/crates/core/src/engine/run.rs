use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSpec, ExperimentConfig};
use crate::acquisition::{acquire, select_random, StrategyKind};
use crate::data::{generate_synthetic, load_manifest_file, split_pool, MultiDomainPool, TrainingView};
use crate::error::{MdalError, Result};
use crate::metrics::{test_accuracy, LearningCurve};
use crate::models::{build_model, fit, ArchitectureKind, FitReport, ModelGraph, ModelSpec, PredictionPart};
use crate::rng::substream;

/// Builds the full dataset from its spec. Synthetic pools depend only on the base seed.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<MultiDomainPool> {
    match spec {
        DatasetSpec::Synthetic(s) => generate_synthetic(s, &mut substream(seed, "data", 0)),
        DatasetSpec::Manifest(path) => load_manifest_file(path),
    }
}

/// One row per completed iteration of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub repeat: usize,
    pub iteration: usize,
    pub cost: usize,
    pub micro_acc: f64,
    pub domain_acc: Vec<f64>,
    pub model: ArchitectureKind,
    pub strategy: StrategyKind,
    pub seed: u64,
    /// Seconds spent on this iteration. Kept out of the persisted rows so
    /// that reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub repeat: usize,
    pub rows: Vec<RunRow>,
    /// The unlabeled pool ran dry before the budget was spent.
    pub exhausted: bool,
}

impl RunRecord {
    pub fn curve(&self) -> Result<LearningCurve> {
        LearningCurve::new(self.rows.iter().map(|r| (r.cost as f64, r.micro_acc)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationStatus {
    Continued,
    BudgetSpent,
    PoolExhausted,
}

/// Live state of one repeat.
#[derive(Debug, Clone)]
pub struct ExperimentState {
    pub repeat: usize,
    pub pool: MultiDomainPool,
    pub model: ModelGraph,
    pub iteration: usize,
    pub rows: Vec<RunRow>,
    pub last_fit: FitReport,
}

impl ExperimentState {
    /// Labels consumed so far.
    pub fn cost(&self) -> usize {
        self.pool.labeled_count()
    }
}

fn model_spec(config: &ExperimentConfig, pool: &MultiDomainPool) -> ModelSpec {
    ModelSpec {
        kind: config.architecture,
        input_dim: pool.dim(),
        hidden_dim: config.hidden,
        classes: pool.classes(),
        domains: pool.domain_count(),
        lambda: config.lambda,
    }
}

fn stream_seed(config: &ExperimentConfig, repeat: usize) -> (u64, u64) {
    (config.seed, repeat as u64)
}

/// Builds a fresh model and trains it on the current labeled set.
fn train_fresh(config: &ExperimentConfig, pool: &MultiDomainPool, repeat: usize, iteration: usize) -> Result<(ModelGraph, FitReport)> {
    let (seed, rep) = stream_seed(config, repeat);
    let mut model = build_model(&model_spec(config, pool), &mut substream(seed, &format!("model/{iteration}"), rep))?;
    let view = TrainingView::carve(pool, config.val_fraction, &mut substream(seed, &format!("valsplit/{iteration}"), rep))?;
    let report = fit(&mut model, &view, &config.fit_config(), &mut substream(seed, &format!("fit/{iteration}"), rep))?;
    Ok((model, report))
}

fn record(state: &mut ExperimentState, config: &ExperimentConfig, started: Instant) -> Result<()> {
    let acc = test_accuracy(&state.model, &state.pool, PredictionPart::Whole)?;
    state.rows.push(RunRow {
        repeat: state.repeat,
        iteration: state.iteration,
        cost: state.cost(),
        micro_acc: acc.micro,
        domain_acc: acc.per_domain,
        model: config.architecture,
        strategy: config.strategy,
        seed: config.seed,
        wall_time: started.elapsed().as_secs_f64(),
    });
    Ok(())
}

/// Splits the pool for this repeat, labels the warm-start set and fits the first model.
///
/// The split and the warm-start set depend only on the seed and repeat index,
/// so every model and strategy sees the same starting point.
pub fn init_experiment(config: &ExperimentConfig, repeat: usize, base: &MultiDomainPool) -> Result<ExperimentState> {
    config.validate()?;
    let started = Instant::now();
    let (seed, rep) = stream_seed(config, repeat);
    let mut pool = base.clone();
    split_pool(&mut pool, config.split, &mut substream(seed, "split", rep))?;
    if config.initial_size > pool.unlabeled_count() {
        return Err(MdalError::Config(format!(
            "initial_size {} exceeds the {} instances of the training pool",
            config.initial_size,
            pool.unlabeled_count()
        )));
    }
    let warm = select_random(&pool, config.initial_size, &mut substream(seed, "init", rep))?;
    pool.reveal_labels(&warm.handles)?;
    let (model, last_fit) = train_fresh(config, &pool, repeat, 0)?;
    let mut state = ExperimentState {
        repeat,
        pool,
        model,
        iteration: 0,
        rows: Vec::new(),
        last_fit,
    };
    record(&mut state, config, started)?;
    Ok(state)
}

/// One AL round: acquire, reveal, retrain from scratch, evaluate.
pub fn run_iteration(state: &mut ExperimentState, config: &ExperimentConfig) -> Result<IterationStatus> {
    let cost = state.cost();
    if cost >= config.budget {
        return Ok(IterationStatus::BudgetSpent);
    }
    let remaining = state.pool.unlabeled_count();
    if remaining == 0 {
        log::warn!("repeat {}: unlabeled pool exhausted at cost {cost}", state.repeat);
        return Ok(IterationStatus::PoolExhausted);
    }
    let started = Instant::now();
    let iteration = state.iteration + 1;
    let b = config.al_batch.min(config.budget - cost).min(remaining);
    let (seed, rep) = stream_seed(config, state.repeat);
    let query = acquire(
        config.strategy,
        &state.model,
        &state.pool,
        b,
        &mut substream(seed, &format!("acquire/{iteration}"), rep),
    )?;
    state.pool.reveal_labels(&query.handles)?;
    let (model, report) = train_fresh(config, &state.pool, state.repeat, iteration)?;
    state.model = model;
    state.last_fit = report;
    state.iteration = iteration;
    record(state, config, started)?;
    log::debug!(
        "{}/{} repeat {} iteration {iteration}: cost {} acc {:.4}",
        config.architecture,
        config.strategy,
        state.repeat,
        state.cost(),
        state.rows.last().map_or(0.0, |r| r.micro_acc)
    );
    Ok(if state.cost() >= config.budget {
        IterationStatus::BudgetSpent
    } else {
        IterationStatus::Continued
    })
}

/// Runs one repeat to the end of the budget.
pub fn run_repeat(config: &ExperimentConfig, repeat: usize, base: &MultiDomainPool) -> Result<RunRecord> {
    let mut state = init_experiment(config, repeat, base)?;
    let exhausted = loop {
        match run_iteration(&mut state, config)? {
            IterationStatus::Continued => {}
            IterationStatus::BudgetSpent => break false,
            IterationStatus::PoolExhausted => break true,
        }
    };
    Ok(RunRecord {
        repeat,
        rows: state.rows,
        exhausted,
    })
}

/// Pointwise summary over repeats at one cost checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatePoint {
    pub cost: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub runs: usize,
}

pub fn aggregate(runs: &[RunRecord]) -> Vec<AggregatePoint> {
    let mut by_cost: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in runs {
        for row in &r.rows {
            by_cost.entry(row.cost).or_default().push(row.micro_acc);
        }
    }
    by_cost
        .into_iter()
        .map(|(cost, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            AggregatePoint {
                cost,
                mean,
                std,
                runs: v.len(),
            }
        })
        .collect()
}

pub struct RunFailure {
    pub repeat: usize,
    pub error: MdalError,
}

pub struct ExperimentResult {
    /// Completed repeats in repeat order.
    pub runs: Vec<RunRecord>,
    pub aggregate: Vec<AggregatePoint>,
    /// First failed repeat, if any; completed runs are still reported.
    pub failure: Option<RunFailure>,
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &RunRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.rows() {
            serde_json::to_writer(&mut w, row)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv(&self, path: &Path) -> Result<()> {
        write_aggregate_csv(&self.aggregate, path)
    }
}

pub fn write_aggregate_csv(points: &[AggregatePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cost", "mean", "std"])?;
    for p in points {
        w.write_record([p.cost.to_string(), p.mean.to_string(), p.std.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every repeat of `config` on an already loaded dataset, on up to
/// `workers` threads. Results are ordered by repeat index whatever the schedule.
pub fn run_experiment_on(config: &ExperimentConfig, base: &MultiDomainPool, workers: usize) -> Result<ExperimentResult> {
    config.validate()?;
    let one = |r: usize| run_repeat(config, r, base);
    let outcomes: Vec<Result<RunRecord>> = if workers <= 1 {
        (0..config.repeats).map(one).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MdalError::Config(format!("cannot start {workers} workers: {e}")))?
            .install(|| (0..config.repeats).into_par_iter().map(one).collect())
    };
    let mut runs = Vec::new();
    let mut failure = None;
    for (repeat, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => runs.push(r),
            Err(error) => {
                log::error!("repeat {repeat} failed: {error}");
                failure.get_or_insert(RunFailure { repeat, error });
            }
        }
    }
    let aggregate = aggregate(&runs);
    Ok(ExperimentResult {
        runs,
        aggregate,
        failure,
    })
}

pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    config.validate()?;
    let base = load_dataset(&config.dataset, config.seed)?;
    run_experiment_on(config, &base, workers)
}
