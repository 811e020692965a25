use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::pool::MultiDomainPool;
use crate::error::{MdalError, Result};
use crate::nn::Tensor2;

/// Gaussian-blob generator with per-domain shift, rotation and label conflicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub domains: usize,
    pub classes: usize,
    pub dim: usize,
    pub samples_per_domain: usize,
    /// Standard deviation σ of the isotropic noise.
    pub noise: f64,
    /// Gaussian modes per class; each instance draws one uniformly.
    pub clusters_per_class: usize,
    /// Norm of each mode's base mean.
    pub class_separation: f64,
    /// Norm of each domain's shift vector.
    pub shift_norm: f64,
    /// Rotation angle (radians) applied per domain in a random plane; 0 disables.
    pub rotation: f64,
    /// Fraction of each domain's instances whose label is permuted by a
    /// per-domain derangement.
    pub conflict_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            domains: 3,
            classes: 4,
            dim: 20,
            // 600 per domain after the default 0.8 train ratio
            samples_per_domain: 750,
            noise: 1.0,
            clusters_per_class: 1,
            class_separation: 2.0,
            shift_norm: 2.0,
            rotation: 0.0,
            conflict_fraction: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.domains < 2 {
            return Err(MdalError::Input(format!(
                "synthetic data needs at least 2 domains, got {}",
                self.domains
            )));
        }
        if self.classes < 2 || self.dim == 0 || self.samples_per_domain == 0 || self.clusters_per_class == 0 {
            return Err(MdalError::Input(
                "synthetic data needs ≥ 2 classes, dim ≥ 1, samples ≥ 1 and ≥ 1 mode per class".into(),
            ));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(MdalError::Input(format!(
                "noise scale must be positive, got {}",
                self.noise
            )));
        }
        if !(0.0..1.0).contains(&self.conflict_fraction) {
            return Err(MdalError::Input(format!(
                "conflict fraction must lie in [0, 1), got {}",
                self.conflict_fraction
            )));
        }
        if self.rotation != 0.0 && self.dim < 2 {
            return Err(MdalError::Input("rotation needs dim ≥ 2".into()));
        }
        Ok(())
    }
}

/// One label flip introduced to emulate a domain conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConflictRecord {
    pub domain: usize,
    pub index: usize,
    pub original: usize,
    pub assigned: usize,
}

/// In-memory description of the generated geometry, useful for diagnostics.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    /// `means[k][c * clusters_per_class + j]` is mode `j` of class `c` in domain `k`.
    pub means: Vec<Vec<Vec<f64>>>,
    pub conflicts: Vec<ConflictRecord>,
}

pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<MultiDomainPool> {
    generate_synthetic_logged(spec, rng).map(|(p, _)| p)
}

pub fn generate_synthetic_logged<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<(MultiDomainPool, SyntheticTruth)> {
    spec.validate()?;
    let d = spec.dim;
    // base[y * m + j] is mode j of class y
    let m = spec.clusters_per_class;
    let base: Vec<Vec<f64>> = (0..spec.classes * m)
        .map(|_| scaled_direction(d, spec.class_separation, rng))
        .collect();
    let mut domains = Vec::with_capacity(spec.domains);
    let mut means = Vec::with_capacity(spec.domains);
    let mut conflicts = Vec::new();
    for k in 0..spec.domains {
        let shift = scaled_direction(d, spec.shift_norm, rng);
        let rotation = (spec.rotation != 0.0).then(|| random_plane(d, rng));
        let class_means: Vec<Vec<f64>> = base
            .iter()
            .map(|m| {
                let shifted: Vec<f64> = m.iter().zip(&shift).map(|(a, b)| a + b).collect();
                match &rotation {
                    Some((u, v)) => rotate_in_plane(&shifted, u, v, spec.rotation),
                    None => shifted,
                }
            })
            .collect();

        let n = spec.samples_per_domain;
        let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
        labels.shuffle(rng);
        let mut data = Vec::with_capacity(n * d);
        for &y in &labels {
            let mode = if m > 1 { rng.random_range(0..m) } else { 0 };
            for &mu in &class_means[y * m + mode] {
                let z: f64 = rng.sample(StandardNormal);
                data.push(mu + spec.noise * z);
            }
        }

        let flips = (spec.conflict_fraction * n as f64).round() as usize;
        if flips > 0 {
            let perm = derangement(spec.classes, rng);
            let chosen = rand::seq::index::sample(rng, n, flips).into_vec();
            let mut chosen = chosen;
            chosen.sort_unstable();
            for i in chosen {
                let original = labels[i];
                labels[i] = perm[original];
                conflicts.push(ConflictRecord {
                    domain: k,
                    index: i,
                    original,
                    assigned: labels[i],
                });
            }
        }
        domains.push((format!("domain{k}"), Tensor2::new(n, d, data)?, labels));
        means.push(class_means);
    }
    let pool = MultiDomainPool::new(domains, spec.classes)?;
    Ok((pool, SyntheticTruth { means, conflicts }))
}

fn gaussian_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn scaled_direction<R: Rng + ?Sized>(d: usize, norm: f64, rng: &mut R) -> Vec<f64> {
    if norm == 0.0 {
        return vec![0.0; d];
    }
    loop {
        let v = gaussian_vec(d, rng);
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-12 {
            return v.into_iter().map(|x| x * norm / len).collect();
        }
    }
}

/// Orthonormal pair spanning a random plane (Gram–Schmidt).
fn random_plane<R: Rng + ?Sized>(d: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let u = scaled_direction(d, 1.0, rng);
    loop {
        let w = gaussian_vec(d, rng);
        let proj: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
        let v: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-9 {
            return (u, v.into_iter().map(|x| x / len).collect());
        }
    }
}

fn rotate_in_plane(x: &[f64], u: &[f64], v: &[f64], angle: f64) -> Vec<f64> {
    let a: f64 = x.iter().zip(u).map(|(p, q)| p * q).sum();
    let b: f64 = x.iter().zip(v).map(|(p, q)| p * q).sum();
    let (s, c) = angle.sin_cos();
    let (a2, b2) = (c * a - s * b, s * a + c * b);
    x.iter()
        .zip(u.iter().zip(v))
        .map(|(&xi, (&ui, &vi))| xi + (a2 - a) * ui + (b2 - b) * vi)
        .collect()
}

/// Uniform permutation of `0..n` without fixed points (rejection sampling).
fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}
