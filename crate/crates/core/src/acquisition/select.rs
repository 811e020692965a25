use rand::seq::index;
use rand::Rng;

use super::{InstanceHandle, QuerySet};
use crate::data::{largest_remainder, MultiDomainPool};
use crate::error::{MdalError, Result};
use crate::nn::{sq_dist, Tensor2};

fn check_b(b: usize) -> Result<()> {
    if b == 0 {
        return Err(MdalError::Input("batch size b must be at least 1".into()));
    }
    Ok(())
}

fn check_rows(emb: &Tensor2, handles: &[InstanceHandle]) -> Result<()> {
    if emb.rows() != handles.len() {
        return Err(MdalError::Dimension(format!(
            "{} embeddings for {} handles",
            emb.rows(),
            handles.len()
        )));
    }
    Ok(())
}

/// Global descending ranking over all domains; ties go to the smaller
/// `(domain, index)`.
pub fn select_top_b_global(scores: &[(InstanceHandle, f64)], b: usize) -> Result<QuerySet> {
    check_b(b)?;
    if let Some((h, s)) = scores.iter().find(|(_, s)| s.is_nan()) {
        return Err(MdalError::Numeric(format!("score of {h:?} is {s}")));
    }
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(QuerySet {
        handles: ranked.into_iter().take(b).map(|(h, _)| h).collect(),
        requested: b,
    })
}

/// Greedy furthest-first traversal conditioned on the labeled embeddings.
///
/// With no labeled points the smallest handle is taken first.
pub fn select_coreset(
    labeled: &Tensor2,
    unlabeled: &Tensor2,
    handles: &[InstanceHandle],
    b: usize,
) -> Result<QuerySet> {
    check_b(b)?;
    check_rows(unlabeled, handles)?;
    if labeled.rows() > 0 && labeled.cols() != unlabeled.cols() {
        return Err(MdalError::Dimension(format!(
            "labeled embeddings have width {}, unlabeled {}",
            labeled.cols(),
            unlabeled.cols()
        )));
    }
    let n = handles.len();
    let mut nearest: Vec<f64> = (0..n)
        .map(|u| {
            labeled
                .iter_rows()
                .map(|l| sq_dist(unlabeled.row(u), l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(b.min(n));
    while out.len() < b.min(n) {
        let mut best: Option<usize> = None;
        for u in (0..n).filter(|&u| !taken[u]) {
            best = match best {
                None => Some(u),
                Some(c) if nearest[u] > nearest[c] || (nearest[u] == nearest[c] && handles[u] < handles[c]) => {
                    Some(u)
                }
                keep => keep,
            };
        }
        let pick = best.expect("an untaken point remains");
        taken[pick] = true;
        out.push(handles[pick]);
        for u in 0..n {
            nearest[u] = nearest[u].min(sq_dist(unlabeled.row(u), unlabeled.row(pick)));
        }
    }
    Ok(QuerySet { handles: out, requested: b })
}

/// k-means++ seeding with `k = b` over the embeddings. When every remaining
/// point coincides with a chosen seed the next seed is uniform over the rest.
pub fn select_badge<R: Rng + ?Sized>(
    emb: &Tensor2,
    handles: &[InstanceHandle],
    b: usize,
    rng: &mut R,
) -> Result<QuerySet> {
    check_b(b)?;
    check_rows(emb, handles)?;
    let mut order: Vec<usize> = (0..handles.len()).collect();
    order.sort_by_key(|&i| handles[i]);
    let n = order.len();
    if b >= n {
        return Ok(QuerySet {
            handles: order.iter().map(|&i| handles[i]).collect(),
            requested: b,
        });
    }
    let mut d2 = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(b);
    let mut next = rng.random_range(0..n);
    loop {
        taken[next] = true;
        out.push(handles[order[next]]);
        if out.len() == b {
            break;
        }
        let seed = emb.row(order[next]);
        for j in 0..n {
            d2[j] = if taken[j] { 0.0 } else { d2[j].min(sq_dist(emb.row(order[j]), seed)) };
        }
        let mass: f64 = d2.iter().sum();
        next = if mass > 0.0 && mass.is_finite() {
            let mut target = rng.random::<f64>() * mass;
            let mut pick = None;
            for j in 0..n {
                if d2[j] > 0.0 {
                    pick = Some(j);
                    if target < d2[j] {
                        break;
                    }
                    target -= d2[j];
                }
            }
            pick.expect("positive mass has a support point")
        } else {
            let free: Vec<usize> = (0..n).filter(|&j| !taken[j]).collect();
            free[rng.random_range(0..free.len())]
        };
    }
    Ok(QuerySet { handles: out, requested: b })
}

/// Per-domain allocation proportional to unlabeled-pool sizes, uniform
/// within each domain.
pub fn select_random<R: Rng + ?Sized>(pool: &MultiDomainPool, b: usize, rng: &mut R) -> Result<QuerySet> {
    check_b(b)?;
    let per: Vec<Vec<usize>> = (0..pool.domain_count()).map(|k| pool.unlabeled_indices(k)).collect();
    let total: usize = per.iter().map(Vec::len).sum();
    let weights: Vec<f64> = per.iter().map(|v| v.len() as f64).collect();
    let alloc = largest_remainder(b.min(total), &weights);
    let mut out = Vec::with_capacity(b.min(total));
    for (k, (idx, &m)) in per.iter().zip(&alloc).enumerate() {
        let mut picked: Vec<usize> = index::sample(rng, idx.len(), m).into_iter().map(|i| idx[i]).collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| InstanceHandle::new(k, i)));
    }
    Ok(QuerySet { handles: out, requested: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h(d: usize, i: usize) -> InstanceHandle {
        InstanceHandle::new(d, i)
    }

    fn col(v: &[f64]) -> Tensor2 {
        Tensor2::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn top_b_examples() {
        let s = [(h(0, 0), 0.1), (h(0, 1), 0.9), (h(1, 0), 0.2)];
        assert_eq!(select_top_b_global(&s, 2).unwrap().handles, vec![h(0, 1), h(1, 0)]);
        let eq = [(h(1, 0), 0.5), (h(0, 1), 0.5), (h(0, 0), 0.5)];
        assert_eq!(select_top_b_global(&eq, 2).unwrap().handles, vec![h(0, 0), h(0, 1)]);
        assert_eq!(select_top_b_global(&s, 10).unwrap().len(), 3);
        assert!(matches!(select_top_b_global(&s, 0), Err(MdalError::Input(_))));
    }

    #[test]
    fn coreset_examples() {
        let q = select_coreset(&col(&[0.0]), &col(&[1.0, 5.0, 6.0]), &[h(0, 0), h(0, 1), h(0, 2)], 2).unwrap();
        assert_eq!(q.handles, vec![h(0, 2), h(0, 0)]);
        let one = select_coreset(&col(&[0.0]), &col(&[3.0]), &[h(1, 4)], 1).unwrap();
        assert_eq!(one.handles, vec![h(1, 4)]);
        // the duplicate of a labeled point comes last
        let q = select_coreset(&col(&[2.0]), &col(&[2.0, 2.5, 3.0]), &[h(0, 0), h(0, 1), h(0, 2)], 3).unwrap();
        assert_eq!(q.handles[2], h(0, 0));
        let seeded = select_coreset(&Tensor2::zeros(0, 1), &col(&[4.0, 0.0, 9.0]), &[h(0, 3), h(0, 1), h(0, 2)], 2)
            .unwrap();
        assert_eq!(seeded.handles, vec![h(0, 1), h(0, 2)]);
    }

    #[test]
    fn badge_examples() {
        let e = col(&[0.0, 0.0, 100.0]);
        let hs = [h(0, 0), h(0, 1), h(0, 2)];
        for seed in 0..50 {
            let q = select_badge(&e, &hs, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(q.handles.contains(&h(0, 2)));
            assert_eq!(q.len(), 2);
        }
        assert_eq!(select_badge(&e, &hs, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().handles, hs.to_vec());
        let same = col(&[1.0; 6]);
        let hs6: Vec<_> = (0..6).map(|i| h(0, i)).collect();
        let q = select_badge(&same, &hs6, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut sorted = q.handles.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        let again = select_badge(&same, &hs6, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(q, again);
    }

    fn pool(sizes: &[usize]) -> MultiDomainPool {
        let doms = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| (format!("d{k}"), Tensor2::zeros(n, 2), vec![0; n]))
            .collect();
        MultiDomainPool::new(doms, 2).unwrap()
    }

    #[test]
    fn random_allocation() {
        let count = |q: &QuerySet, k| q.handles.iter().filter(|h| h.domain == k).count();
        let q = select_random(&pool(&[10, 10]), 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((count(&q, 0), count(&q, 1)), (2, 2));
        let q = select_random(&pool(&[9, 1]), 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((count(&q, 0), count(&q, 1)), (9, 1));
        let a = select_random(&pool(&[30, 20]), 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = select_random(&pool(&[30, 20]), 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }
}
