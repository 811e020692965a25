use std::cmp::Ordering;

use rand::Rng;
use serde::Serialize;

use crate::error::{MdalError, Result};
use crate::nn::{sq_dist, Tensor2};

const RESTARTS: usize = 5;
const LLOYD_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    pub k_star: usize,
    /// Within-cluster squared error for k = 1..=k_max.
    pub losses: Vec<f64>,
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn distinct_rows(points: &Tensor2) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = points.iter_rows().map(<[f64]>::to_vec).collect();
    rows.sort_by(|a, b| cmp_rows(a, b));
    rows.dedup_by(|a, b| cmp_rows(a, b).is_eq());
    rows
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(j, c)| (j, sq_dist(point, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn sse(points: &Tensor2, centers: &[Vec<f64>]) -> f64 {
    points.iter_rows().map(|p| nearest(p, centers).1).sum()
}

/// Lloyd iterations; a center left without points stays where it was.
fn lloyd(points: &Tensor2, mut centers: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, f64) {
    let dim = points.cols();
    for _ in 0..LLOYD_ITERS {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for p in points.iter_rows() {
            let (j, _) = nearest(p, &centers);
            counts[j] += 1;
            sums[j].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut moved = false;
        for (j, c) in centers.iter_mut().enumerate() {
            if counts[j] > 0 {
                let next: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
                moved |= next != *c;
                *c = next;
            }
        }
        if !moved {
            break;
        }
    }
    let loss = sse(points, &centers);
    (centers, loss)
}

fn kmeans_pp_seeds<R: Rng + ?Sized>(distinct: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![distinct[rng.random_range(0..distinct.len())].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = distinct.iter().map(|p| nearest(p, &centers).1).collect();
        let mass: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * mass;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("more distinct points than centers");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        centers.push(distinct[pick].clone());
    }
    centers
}

/// k-means loss curve for k = 1..=k_max: best of several k-means++ restarts
/// and a warm start from the previous k's centers plus the worst-fit point.
/// The warm start makes the curve non-increasing.
pub fn kmeans_loss<R: Rng + ?Sized>(points: &Tensor2, k_max: usize, rng: &mut R) -> Result<Vec<f64>> {
    if points.rows() == 0 || k_max == 0 {
        return Err(MdalError::Input("k-means needs points and k_max ≥ 1".into()));
    }
    let distinct = distinct_rows(points);
    let n = points.rows() as f64;
    let mean: Vec<f64> = points.column_sums().iter().map(|s| s / n).collect();
    let mut best_centers = vec![mean];
    let mut losses = vec![sse(points, &best_centers)];
    for k in 2..=k_max {
        if k > distinct.len() {
            losses.push(0.0);
            continue;
        }
        let far = points
            .iter_rows()
            .map(|p| (p, nearest(p, &best_centers).1))
            .fold((points.row(0), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
            .0
            .to_vec();
        let mut warm = best_centers.clone();
        warm.push(far);
        let mut best = lloyd(points, warm);
        for _ in 0..RESTARTS {
            let cand = lloyd(points, kmeans_pp_seeds(&distinct, k, rng));
            if cand.1 < best.1 {
                best = cand;
            }
        }
        let prev = *losses.last().expect("k = 1 is present");
        losses.push(best.1.min(prev));
        best_centers = best.0;
    }
    Ok(losses)
}

/// Turning point of a non-increasing loss curve: the k farthest from the
/// chord between its ends after scaling both axes to [0, 1]. The curve is
/// cut after its first zero.
pub fn elbow_point(losses: &[f64]) -> usize {
    let m = losses.iter().position(|&l| l <= 0.0).map_or(losses.len(), |i| i + 1);
    if m < 3 {
        return 1;
    }
    let (hi, lo) = (losses[0], losses[m - 1]);
    if !(hi > lo) {
        return 1;
    }
    let mut best = (1, f64::NEG_INFINITY);
    for (i, &l) in losses[..m].iter().enumerate() {
        let x = i as f64 / (m - 1) as f64;
        let y = (l - lo) / (hi - lo);
        let dist = (x + y - 1.0).abs() / std::f64::consts::SQRT_2;
        if dist > best.1 {
            best = (i + 1, dist);
        }
    }
    best.0
}

pub fn elbow_diversity<R: Rng + ?Sized>(embeddings: &Tensor2, k_max: usize, rng: &mut R) -> Result<DiversityReport> {
    if k_max < 2 || k_max > embeddings.rows() {
        return Err(MdalError::Input(format!(
            "k_max must lie in [2, {}], got {k_max}",
            embeddings.rows()
        )));
    }
    let losses = kmeans_loss(embeddings, k_max, rng)?;
    Ok(DiversityReport {
        k_star: elbow_point(&losses),
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_points() {
        let e = Tensor2::filled(6, 3, 2.5);
        let r = elbow_diversity(&e, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.k_star, 1);
        assert!(r.losses.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn three_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let c = centers[i % 3];
                vec![c[0] + rng.random_range(-0.1..0.1), c[1] + rng.random_range(-0.1..0.1)]
            })
            .collect();
        let e = Tensor2::from_rows(&rows).unwrap();
        let r = elbow_diversity(&e, 8, &mut rng).unwrap();
        assert!(r.losses.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.k_star, 3, "{:?}", r.losses);
    }

    #[test]
    fn chord_by_hand() {
        // normalized points: (0,1) (1/3, 0.2) (2/3, 0.1) (1, 0) → k = 2 is farthest
        assert_eq!(elbow_point(&[10.0, 2.0, 1.0, 0.0]), 2);
        assert_eq!(elbow_point(&[3.0, 2.0, 1.0]), 1);
        assert_eq!(elbow_point(&[5.0, 0.0, 0.0, 0.0]), 1);
    }

    #[test]
    fn bad_k_max() {
        let e = Tensor2::zeros(3, 2);
        assert!(elbow_diversity(&e, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(elbow_diversity(&e, 4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
