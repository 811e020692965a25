/// Maximum relative error between `analytic` and central finite differences of `loss`.
///
/// `loss` receives the perturbed parameter vector and the index of the
/// coordinate being perturbed, so surrogate objectives can weight terms per
/// parameter group. Relative error uses `max(|a|, |n|, 1e-12)` as denominator.
pub fn grad_check<F>(params: &[f64], analytic: &[f64], eps: f64, mut loss: F) -> f64
where
    F: FnMut(&[f64], usize) -> f64,
{
    assert!(
        (1e-7..=1e-3).contains(&eps),
        "finite-difference step {eps} outside [1e-7, 1e-3]"
    );
    assert_eq!(params.len(), analytic.len(), "one analytic entry per parameter");
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let up = loss(&work, i);
        work[i] = orig - eps;
        let down = loss(&work, i);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}
