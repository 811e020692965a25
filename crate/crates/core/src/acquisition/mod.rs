//! Query strategies and the cross-domain pooling rules.
//!
//! Score-based strategies score every unlabeled instance of every domain and
//! rank them together. Two-stage strategies first build one embedding pool
//! over all domains and then run a diversity-seeking selector on it.

mod score;
mod select;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::data::InstanceHandle;
use crate::data::MultiDomainPool;
use crate::error::{MdalError, Result};
use crate::models::{ModelGraph, PredictionPart};
use crate::nn::Tensor2;

pub use score::{egl_closed_form, score_bvsb, score_egl};
pub use select::{select_badge, select_coreset, select_random, select_top_b_global};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Random,
    Uncertainty,
    Egl,
    Coreset,
    Badge,
}

/// Which selection criteria a strategy takes into account.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyTraits {
    pub informativeness: bool,
    pub representativeness: bool,
    pub batch_diversity: bool,
    pub two_stage: bool,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::Uncertainty,
        StrategyKind::Egl,
        StrategyKind::Coreset,
        StrategyKind::Badge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Uncertainty => "uncertainty",
            StrategyKind::Egl => "egl",
            StrategyKind::Coreset => "coreset",
            StrategyKind::Badge => "badge",
        }
    }

    pub fn traits(self) -> StrategyTraits {
        let t = |informativeness, representativeness, batch_diversity, two_stage| StrategyTraits {
            informativeness,
            representativeness,
            batch_diversity,
            two_stage,
        };
        match self {
            StrategyKind::Random => t(false, false, false, false),
            StrategyKind::Uncertainty | StrategyKind::Egl => t(true, false, false, false),
            StrategyKind::Coreset => t(false, true, true, true),
            StrategyKind::Badge => t(true, true, true, true),
        }
    }

    pub fn is_score_based(self) -> bool {
        matches!(self, StrategyKind::Uncertainty | StrategyKind::Egl)
    }

    pub fn is_two_stage(self) -> bool {
        self.traits().two_stage
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = MdalError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                MdalError::Config(format!(
                    "unknown strategy '{s}' (expected one of random, uncertainty, egl, coreset, badge)"
                ))
            })
    }
}

/// Instances chosen for labeling in one round, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuerySet {
    pub handles: Vec<InstanceHandle>,
    pub requested: usize,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }
}

/// What a strategy computed over the unlabeled pool before selecting.
#[derive(Debug, Clone, PartialEq)]
pub enum PoolValues {
    None,
    Scores(Vec<f64>),
    Embeddings(Tensor2),
}

/// Per-instance scores or embeddings for every unlabeled handle, in handle order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPool {
    pub handles: Vec<InstanceHandle>,
    pub values: PoolValues,
}

impl ScoredPool {
    /// CSV with columns `domain,index,score` or `domain,index,e0,e1,...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        match &self.values {
            PoolValues::None => {
                writeln!(w, "domain,index")?;
                for h in &self.handles {
                    writeln!(w, "{},{}", h.domain, h.index)?;
                }
            }
            PoolValues::Scores(s) => {
                writeln!(w, "domain,index,score")?;
                for (h, v) in self.handles.iter().zip(s) {
                    writeln!(w, "{},{},{v}", h.domain, h.index)?;
                }
            }
            PoolValues::Embeddings(e) => {
                let cols: Vec<String> = (0..e.cols()).map(|j| format!("e{j}")).collect();
                writeln!(w, "domain,index,{}", cols.join(","))?;
                for (h, row) in self.handles.iter().zip(e.iter_rows()) {
                    let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{},{},{}", h.domain, h.index, vals.join(","))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Probabilities and penultimate features of the given handles, each routed
/// through its own domain's pathway.
pub(crate) fn pool_traces(
    model: &ModelGraph,
    pool: &MultiDomainPool,
    handles: &[InstanceHandle],
) -> Result<(Tensor2, Tensor2)> {
    let mut probs = Tensor2::zeros(handles.len(), model.classes());
    let mut pen = Tensor2::zeros(handles.len(), model.penultimate_dim());
    for k in 0..pool.domain_count() {
        let rows: Vec<usize> = (0..handles.len()).filter(|&r| handles[r].domain == k).collect();
        if rows.is_empty() {
            continue;
        }
        let idx: Vec<usize> = rows.iter().map(|&r| handles[r].index).collect();
        let x = pool.domain(k).features().select_rows(&idx);
        let t = model.trace(&x, k, PredictionPart::Whole)?;
        for (i, &r) in rows.iter().enumerate() {
            probs.row_mut(r).copy_from_slice(t.probs.row(i));
            pen.row_mut(r).copy_from_slice(t.penultimate.row(i));
        }
    }
    Ok((probs, pen))
}

/// Computes what `strategy` needs over the current unlabeled pool.
pub fn score_pool(strategy: StrategyKind, model: &ModelGraph, pool: &MultiDomainPool) -> Result<ScoredPool> {
    let handles = pool.unlabeled_handles();
    let values = match strategy {
        StrategyKind::Random => PoolValues::None,
        StrategyKind::Uncertainty | StrategyKind::Egl | StrategyKind::Coreset | StrategyKind::Badge => {
            let (probs, pen) = pool_traces(model, pool, &handles)?;
            match strategy {
                StrategyKind::Uncertainty => {
                    PoolValues::Scores(probs.iter_rows().map(score_bvsb).collect::<Result<_>>()?)
                }
                StrategyKind::Egl => PoolValues::Scores(
                    probs
                        .iter_rows()
                        .zip(pen.iter_rows())
                        .map(|(p, h)| egl_closed_form(p, h))
                        .collect(),
                ),
                StrategyKind::Coreset => PoolValues::Embeddings(pen),
                _ => {
                    let rows: Vec<Vec<f64>> = probs
                        .iter_rows()
                        .zip(pen.iter_rows())
                        .map(|(p, h)| crate::models::badge_embedding(p, h))
                        .collect();
                    let cols = model.penultimate_dim() * model.classes() + model.classes();
                    PoolValues::Embeddings(if rows.is_empty() {
                        Tensor2::zeros(0, cols)
                    } else {
                        Tensor2::from_rows(&rows)?
                    })
                }
            }
        }
    };
    Ok(ScoredPool { handles, values })
}

/// Chooses up to `b` unlabeled instances with `strategy`.
pub fn acquire<R: Rng + ?Sized>(
    strategy: StrategyKind,
    model: &ModelGraph,
    pool: &MultiDomainPool,
    b: usize,
    rng: &mut R,
) -> Result<QuerySet> {
    Ok(acquire_scored(strategy, model, pool, b, rng)?.0)
}

/// As [`acquire`], also returning the pool values the choice was based on.
pub fn acquire_scored<R: Rng + ?Sized>(
    strategy: StrategyKind,
    model: &ModelGraph,
    pool: &MultiDomainPool,
    b: usize,
    rng: &mut R,
) -> Result<(QuerySet, ScoredPool)> {
    if b == 0 {
        return Err(MdalError::Input("batch size b must be at least 1".into()));
    }
    let scored = score_pool(strategy, model, pool)?;
    let query = match (&scored.values, strategy) {
        (PoolValues::None, _) => select_random(pool, b, rng)?,
        (PoolValues::Scores(s), _) => {
            let pairs: Vec<(InstanceHandle, f64)> = scored.handles.iter().copied().zip(s.iter().copied()).collect();
            select_top_b_global(&pairs, b)?
        }
        (PoolValues::Embeddings(e), StrategyKind::Coreset) => {
            let labeled = pool.labeled_handles();
            let (_, lab_emb) = pool_traces(model, pool, &labeled)?;
            select_coreset(&lab_emb, e, &scored.handles, b)?
        }
        (PoolValues::Embeddings(e), _) => select_badge(e, &scored.handles, b, rng)?,
    };
    Ok((query, scored))
}
