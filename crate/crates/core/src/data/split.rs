use rand::seq::SliceRandom;
use rand::Rng;

use super::pool::{MultiDomainPool, Split};
use crate::error::{MdalError, Result};

const PARTS: [Split; 3] = [Split::Train, Split::Val, Split::Test];

/// Default train/validation/test ratios.
pub const DEFAULT_SPLIT: [f64; 3] = [0.8, 0.1, 0.1];

/// Largest-remainder apportionment of `total` according to `weights`.
/// Ties in the remainder go to the lower index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Per-domain class-stratified train/validation/test partition. Clears all labels.
pub fn split_pool<R: Rng + ?Sized>(pool: &mut MultiDomainPool, ratios: [f64; 3], rng: &mut R) -> Result<()> {
    if ratios.iter().any(|r| !(*r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(MdalError::Config(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    for k in 0..pool.domain_count() {
        let labels = pool.raw_labels(k).to_vec();
        let n = labels.len();
        let totals = largest_remainder(n, &ratios);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); pool.classes()];
        for (i, &y) in labels.iter().enumerate() {
            by_class[y].push(i);
        }
        let present: Vec<&Vec<usize>> = by_class.iter().filter(|c| !c.is_empty()).collect();
        let mut split = vec![Split::Train; n];

        if present.iter().any(|c| c.len() < PARTS.len()) {
            log::warn!(
                "domain {}: a class has fewer than {} instances, splitting without stratification",
                pool.domain(k).name(),
                PARTS.len()
            );
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let mut cursor = 0;
            for (p, &t) in PARTS.iter().zip(&totals) {
                for &i in &idx[cursor..cursor + t] {
                    split[i] = *p;
                }
                cursor += t;
            }
        } else {
            let counts = stratified_counts(&present, &ratios, &totals);
            for (members, c) in present.iter().zip(counts) {
                let mut idx = (*members).clone();
                idx.shuffle(rng);
                let mut cursor = 0;
                for (p, t) in PARTS.iter().zip(c) {
                    for &i in &idx[cursor..cursor + t] {
                        split[i] = *p;
                    }
                    cursor += t;
                }
            }
        }
        pool.set_partition(k, split);
    }
    Ok(())
}

/// Per-class partition sizes: each class gets floor or ceil of its exact
/// share, with the ceilings distributed so partition totals hit `totals`.
fn stratified_counts(classes: &[&Vec<usize>], ratios: &[f64; 3], totals: &[usize]) -> Vec<[usize; 3]> {
    let exact: Vec<[f64; 3]> = classes
        .iter()
        .map(|c| {
            let n = c.len() as f64;
            [n * ratios[0], n * ratios[1], n * ratios[2]]
        })
        .collect();
    let mut counts: Vec<[usize; 3]> = exact
        .iter()
        .map(|e| [e[0].floor() as usize, e[1].floor() as usize, e[2].floor() as usize])
        .collect();
    let mut demand: Vec<isize> = (0..3)
        .map(|p| totals[p] as isize - counts.iter().map(|c| c[p] as isize).sum::<isize>())
        .collect();
    for (ci, members) in classes.iter().enumerate() {
        let mut extra = members.len() - counts[ci].iter().sum::<usize>();
        while extra > 0 {
            // unfilled partition with the largest outstanding demand, then largest remainder
            let pick = (0..3)
                .filter(|&p| counts[ci][p] as f64 <= exact[ci][p])
                .max_by(|&a, &b| {
                    demand[a]
                        .cmp(&demand[b])
                        .then((exact[ci][a] - exact[ci][a].floor()).total_cmp(&(exact[ci][b] - exact[ci][b].floor())))
                        .then(b.cmp(&a))
                })
                .unwrap_or(0);
            counts[ci][pick] += 1;
            demand[pick] -= 1;
            extra -= 1;
        }
    }
    counts
}
