use serde::{Deserialize, Serialize};

use crate::error::{MdalError, Result};
use crate::nn::Tensor2;

/// Global address of one instance: `(domain, index within that domain)`.
///
/// The derived ordering is the global tie-breaking order used by every selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceHandle {
    pub domain: usize,
    pub index: usize,
}

impl InstanceHandle {
    pub fn new(domain: usize, index: usize) -> Self {
        Self { domain, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    name: String,
    features: Tensor2,
    labels: Vec<usize>,
    split: Vec<Split>,
    labeled: Vec<bool>,
}

impl DomainData {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Tensor2 {
        &self.features
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    fn indices_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(i)).collect()
    }
}

/// K domains sharing one feature space and one label set.
///
/// Labels are only handed out through access methods that respect the
/// labeled mask: training code reads [`MultiDomainPool::training_label`],
/// evaluation reads [`MultiDomainPool::evaluation_label`], and the
/// simulated oracle moves instances into the labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomainPool {
    domains: Vec<DomainData>,
    classes: usize,
    dim: usize,
}

impl MultiDomainPool {
    /// Builds a pool with every instance in the train partition and nothing labeled.
    pub fn new(domains: Vec<(String, Tensor2, Vec<usize>)>, classes: usize) -> Result<Self> {
        if domains.is_empty() {
            return Err(MdalError::Input("a pool needs at least one domain".into()));
        }
        if classes == 0 {
            return Err(MdalError::Input("a pool needs at least one class".into()));
        }
        let dim = domains[0].1.cols();
        let mut out = Vec::with_capacity(domains.len());
        for (name, features, labels) in domains {
            if features.cols() != dim {
                return Err(MdalError::Dimension(format!(
                    "domain {name} has {} features, expected {dim}",
                    features.cols()
                )));
            }
            if features.rows() != labels.len() {
                return Err(MdalError::Dimension(format!(
                    "domain {name} has {} rows but {} labels",
                    features.rows(),
                    labels.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
                return Err(MdalError::Input(format!(
                    "domain {name} has label {bad} outside {classes} classes"
                )));
            }
            if !features.is_finite() {
                return Err(MdalError::Numeric(format!("features of domain {name}")));
            }
            let n = labels.len();
            out.push(DomainData {
                name,
                features,
                labels,
                split: vec![Split::Train; n],
                labeled: vec![false; n],
            });
        }
        Ok(Self {
            domains: out,
            classes,
            dim,
        })
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self, k: usize) -> &DomainData {
        &self.domains[k]
    }

    pub fn domains(&self) -> &[DomainData] {
        &self.domains
    }

    pub fn features(&self, h: InstanceHandle) -> &[f64] {
        self.domains[h.domain].features.row(h.index)
    }

    pub fn split_of(&self, h: InstanceHandle) -> Split {
        self.domains[h.domain].split[h.index]
    }

    pub fn is_labeled(&self, h: InstanceHandle) -> bool {
        self.domains[h.domain].labeled[h.index]
    }

    pub fn indices(&self, k: usize, split: Split) -> Vec<usize> {
        let d = &self.domains[k];
        d.indices_where(|i| d.split[i] == split)
    }

    pub fn labeled_indices(&self, k: usize) -> Vec<usize> {
        let d = &self.domains[k];
        d.indices_where(|i| d.labeled[i])
    }

    pub fn unlabeled_indices(&self, k: usize) -> Vec<usize> {
        let d = &self.domains[k];
        d.indices_where(|i| d.split[i] == Split::Train && !d.labeled[i])
    }

    /// All unlabeled train handles in `(domain, index)` order.
    pub fn unlabeled_handles(&self) -> Vec<InstanceHandle> {
        (0..self.domain_count())
            .flat_map(|k| {
                self.unlabeled_indices(k)
                    .into_iter()
                    .map(move |i| InstanceHandle::new(k, i))
            })
            .collect()
    }

    pub fn labeled_handles(&self) -> Vec<InstanceHandle> {
        (0..self.domain_count())
            .flat_map(|k| {
                self.labeled_indices(k)
                    .into_iter()
                    .map(move |i| InstanceHandle::new(k, i))
            })
            .collect()
    }

    /// Labeling cost so far: |L| summed over domains.
    pub fn labeled_count(&self) -> usize {
        self.domains
            .iter()
            .map(|d| d.labeled.iter().filter(|&&l| l).count())
            .sum()
    }

    pub fn unlabeled_count(&self) -> usize {
        (0..self.domain_count())
            .map(|k| self.unlabeled_indices(k).len())
            .sum()
    }

    pub fn train_count(&self, k: usize) -> usize {
        self.domains[k]
            .split
            .iter()
            .filter(|&&s| s == Split::Train)
            .count()
    }

    /// Label of a labeled instance. Unlabeled instances are refused.
    pub fn training_label(&self, h: InstanceHandle) -> Result<usize> {
        self.check_handle(h)?;
        if !self.is_labeled(h) {
            return Err(MdalError::Contract(format!(
                "label of unlabeled instance {h:?} requested for training"
            )));
        }
        Ok(self.domains[h.domain].labels[h.index])
    }

    /// Label of a validation or test instance.
    pub fn evaluation_label(&self, h: InstanceHandle) -> Result<usize> {
        self.check_handle(h)?;
        match self.split_of(h) {
            Split::Val | Split::Test => Ok(self.domains[h.domain].labels[h.index]),
            Split::Train => Err(MdalError::Contract(format!(
                "instance {h:?} is in the train partition, not an evaluation split"
            ))),
        }
    }

    /// Ground truth as known to the simulated oracle.
    ///
    /// Not for training code; it exists for label reveal and for diagnostics
    /// that are explicitly about ground truth.
    pub fn oracle_label(&self, h: InstanceHandle) -> usize {
        self.domains[h.domain].labels[h.index]
    }

    /// Moves every handle from the unlabeled to the labeled set. Either all
    /// handles are revealed or, on error, none are.
    pub fn reveal_labels(&mut self, handles: &[InstanceHandle]) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(handles.len());
        for &h in handles {
            self.check_handle(h)?;
            if self.split_of(h) != Split::Train {
                return Err(MdalError::Contract(format!(
                    "instance {h:?} is not in the train partition"
                )));
            }
            if self.is_labeled(h) || !seen.insert(h) {
                return Err(MdalError::Contract(format!("instance {h:?} is already labeled")));
            }
        }
        for &h in handles {
            self.domains[h.domain].labeled[h.index] = true;
        }
        Ok(())
    }

    /// Replaces domain `k`'s partition and clears its labeled mask.
    pub(crate) fn set_partition(&mut self, k: usize, split: Vec<Split>) {
        let d = &mut self.domains[k];
        assert_eq!(split.len(), d.len());
        d.split = split;
        d.labeled.iter_mut().for_each(|l| *l = false);
    }

    pub(crate) fn raw_labels(&self, k: usize) -> &[usize] {
        &self.domains[k].labels
    }

    fn check_handle(&self, h: InstanceHandle) -> Result<()> {
        if h.domain >= self.domain_count() || h.index >= self.domains[h.domain].len() {
            return Err(MdalError::Input(format!("handle {h:?} is out of range")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MultiDomainPool {
        let a = Tensor2::from_rows(&[[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let b = Tensor2::from_rows(&[[2.0, 1.0], [3.0, 0.0]]).unwrap();
        MultiDomainPool::new(vec![("a".into(), a, vec![0, 1, 1]), ("b".into(), b, vec![1, 0])], 2)
            .unwrap()
    }

    #[test]
    fn reveal_is_exact_and_once() {
        let mut p = tiny();
        let h = InstanceHandle::new(1, 0);
        assert!(p.training_label(h).is_err());
        p.reveal_labels(&[h]).unwrap();
        assert_eq!(p.labeled_count(), 1);
        assert_eq!(p.training_label(h).unwrap(), 1);
        assert!(matches!(p.reveal_labels(&[h]), Err(MdalError::Contract(_))));
        assert_eq!(p.labeled_count(), 1);
    }

    #[test]
    fn reveal_is_atomic() {
        let mut p = tiny();
        let good = InstanceHandle::new(0, 0);
        let dup = [good, InstanceHandle::new(0, 1), good];
        assert!(p.reveal_labels(&dup).is_err());
        assert_eq!(p.labeled_count(), 0);
        assert!(p.reveal_labels(&[InstanceHandle::new(5, 0)]).is_err());
    }

    #[test]
    fn mismatched_domains_rejected() {
        let a = Tensor2::zeros(2, 3);
        let b = Tensor2::zeros(2, 4);
        let err =
            MultiDomainPool::new(vec![("a".into(), a, vec![0, 0]), ("b".into(), b, vec![0, 0])], 1)
                .unwrap_err();
        assert!(err.to_string().contains("domain b"));
    }

    #[test]
    fn handles_are_ordered() {
        let p = tiny();
        let hs = p.unlabeled_handles();
        assert_eq!(hs.len(), 5);
        assert!(hs.windows(2).all(|w| w[0] < w[1]));
    }
}
