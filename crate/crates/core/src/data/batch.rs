use rand::seq::SliceRandom;
use rand::Rng;

use super::pool::{InstanceHandle, MultiDomainPool, Split};
use crate::error::{MdalError, Result};
use crate::nn::Tensor2;

/// Instances with known labels, each tagged with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub x: Tensor2,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(x: Tensor2, labels: Vec<usize>, domains: Vec<usize>) -> Result<Self> {
        if labels.len() != x.rows() || domains.len() != x.rows() {
            return Err(MdalError::Dimension(format!(
                "batch of {} rows with {} labels and {} domain ids",
                x.rows(),
                labels.len(),
                domains.len()
            )));
        }
        Ok(Self { x, labels, domains })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> LabeledBatch {
        LabeledBatch {
            x: self.x.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            domains: rows.iter().map(|&r| self.domains[r]).collect(),
        }
    }
}

/// Labeled and unlabeled instances for the domain-adversarial term.
/// `labels[i]` is `None` for unlabeled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub x: Tensor2,
    pub domains: Vec<usize>,
    pub labels: Vec<Option<usize>>,
}

impl MixedBatch {
    pub fn new(x: Tensor2, domains: Vec<usize>, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != x.rows() || domains.len() != x.rows() {
            return Err(MdalError::Dimension(format!(
                "mixed batch of {} rows with {} labels and {} domain ids",
                x.rows(),
                labels.len(),
                domains.len()
            )));
        }
        Ok(Self { x, domains, labels })
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }
}

/// Everything a fit may see: labeled training rows, a validation carve of
/// the labeled set, and the unlabeled rows (features only).
#[derive(Debug, Clone)]
pub struct TrainingView {
    pub train: LabeledBatch,
    pub train_handles: Vec<InstanceHandle>,
    pub val: LabeledBatch,
    pub val_handles: Vec<InstanceHandle>,
    pub unlabeled_x: Tensor2,
    pub unlabeled_domains: Vec<usize>,
    pub unlabeled_handles: Vec<InstanceHandle>,
    domain_count: usize,
}

impl TrainingView {
    /// Carves `val_fraction` of each domain's labeled set into validation
    /// (rounded, at least one instance, leaving at least one for training).
    pub fn carve<R: Rng + ?Sized>(
        pool: &MultiDomainPool,
        val_fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(MdalError::Config(format!(
                "validation fraction must lie in (0, 1), got {val_fraction}"
            )));
        }
        let mut val = Vec::with_capacity(pool.domain_count());
        for k in 0..pool.domain_count() {
            let mut idx = pool.labeled_indices(k);
            if idx.len() < 2 {
                return Err(MdalError::Training(format!(
                    "domain {} has {} labeled instances; training and validation each need one",
                    pool.domain(k).name(),
                    idx.len()
                )));
            }
            idx.shuffle(rng);
            let n_val = ((idx.len() as f64 * val_fraction).round() as usize).clamp(1, idx.len() - 1);
            let mut chosen = idx[..n_val].to_vec();
            chosen.sort_unstable();
            val.push(chosen);
        }
        Self::with_validation(pool, &val)
    }

    /// Builds the view with an explicit per-domain validation subset of the labeled set.
    pub fn with_validation(pool: &MultiDomainPool, val: &[Vec<usize>]) -> Result<Self> {
        if val.len() != pool.domain_count() {
            return Err(MdalError::Input(format!(
                "validation index sets for {} domains, pool has {}",
                val.len(),
                pool.domain_count()
            )));
        }
        let mut train_handles = Vec::new();
        let mut val_handles = Vec::new();
        for (k, val_k) in val.iter().enumerate() {
            let labeled = pool.labeled_indices(k);
            for &i in val_k {
                if !pool.is_labeled(InstanceHandle::new(k, i)) {
                    return Err(MdalError::Contract(format!(
                        "validation instance ({k}, {i}) is not labeled"
                    )));
                }
            }
            let before = train_handles.len();
            for i in labeled {
                let h = InstanceHandle::new(k, i);
                if val_k.contains(&i) {
                    val_handles.push(h);
                } else {
                    train_handles.push(h);
                }
            }
            if train_handles.len() == before {
                return Err(MdalError::Training(format!(
                    "domain {} has no labeled training instances",
                    pool.domain(k).name()
                )));
            }
            if val_k.is_empty() {
                return Err(MdalError::Training(format!(
                    "domain {} has no validation instances",
                    pool.domain(k).name()
                )));
            }
        }
        let train = gather_labeled(pool, &train_handles)?;
        let val = gather_labeled(pool, &val_handles)?;
        let unlabeled_handles: Vec<InstanceHandle> = pool
            .unlabeled_handles()
            .into_iter()
            .filter(|h| pool.split_of(*h) == Split::Train)
            .collect();
        let rows: Vec<&[f64]> = unlabeled_handles.iter().map(|&h| pool.features(h)).collect();
        let unlabeled_x = if rows.is_empty() {
            Tensor2::zeros(0, pool.dim())
        } else {
            Tensor2::from_rows(&rows)?
        };
        Ok(Self {
            train,
            train_handles,
            val,
            val_handles,
            unlabeled_domains: unlabeled_handles.iter().map(|h| h.domain).collect(),
            unlabeled_x,
            unlabeled_handles,
            domain_count: pool.domain_count(),
        })
    }

    pub fn domain_count(&self) -> usize {
        self.domain_count
    }

    /// Draws up to `size` distinct rows uniformly from labeled-train ∪ unlabeled.
    pub fn sample_mixed<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> MixedBatch {
        let n_lab = self.train.len();
        let total = n_lab + self.unlabeled_domains.len();
        let picks = rand::seq::index::sample(rng, total, size.min(total)).into_vec();
        let mut rows: Vec<&[f64]> = Vec::with_capacity(picks.len());
        let mut domains = Vec::with_capacity(picks.len());
        let mut labels = Vec::with_capacity(picks.len());
        for p in picks {
            if p < n_lab {
                rows.push(self.train.x.row(p));
                domains.push(self.train.domains[p]);
                labels.push(Some(self.train.labels[p]));
            } else {
                let u = p - n_lab;
                rows.push(self.unlabeled_x.row(u));
                domains.push(self.unlabeled_domains[u]);
                labels.push(None);
            }
        }
        let x = Tensor2::from_rows(&rows).expect("rows share the pool width");
        MixedBatch { x, domains, labels }
    }
}

fn gather_labeled(pool: &MultiDomainPool, handles: &[InstanceHandle]) -> Result<LabeledBatch> {
    let rows: Vec<&[f64]> = handles.iter().map(|&h| pool.features(h)).collect();
    let labels = handles
        .iter()
        .map(|&h| pool.training_label(h))
        .collect::<Result<Vec<_>>>()?;
    let x = if rows.is_empty() {
        Tensor2::zeros(0, pool.dim())
    } else {
        Tensor2::from_rows(&rows)?
    };
    LabeledBatch::new(x, labels, handles.iter().map(|h| h.domain).collect())
}

/// Test-partition instances of every domain with their labels.
pub fn evaluation_batch(pool: &MultiDomainPool, split: Split) -> Result<LabeledBatch> {
    let handles: Vec<InstanceHandle> = (0..pool.domain_count())
        .flat_map(|k| pool.indices(k, split).into_iter().map(move |i| InstanceHandle::new(k, i)))
        .collect();
    let rows: Vec<&[f64]> = handles.iter().map(|&h| pool.features(h)).collect();
    let labels = handles
        .iter()
        .map(|&h| pool.evaluation_label(h))
        .collect::<Result<Vec<_>>>()?;
    let x = if rows.is_empty() {
        Tensor2::zeros(0, pool.dim())
    } else {
        Tensor2::from_rows(&rows)?
    };
    LabeledBatch::new(x, labels, handles.iter().map(|h| h.domain).collect())
}
