use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{LabeledBatch, MixedBatch, MultiDomainPool, InstanceHandle, TrainingView};
use crate::error::MdalError;
use crate::nn::{OptimizerKind, Tensor2};
use crate::selftest::{gaussian_matrix, random_batches, total_loss_grad_check};

fn spec(kind: ArchitectureKind, d: usize, h: usize, c: usize, k: usize) -> ModelSpec {
    ModelSpec {
        kind,
        input_dim: d,
        hidden_dim: h,
        classes: c,
        domains: k,
        lambda: 0.1,
    }
}

fn model(kind: ArchitectureKind, seed: u64) -> ModelGraph {
    build_model(&spec(kind, 7, 5, 3, 3), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Independent parameter-count formula per wiring.
fn expected_params(kind: ArchitectureKind, d: usize, h: usize, c: usize, k: usize) -> usize {
    let f = d * h + h;
    let head = |inp: usize| inp * c + c;
    let disc = |inp: usize| inp * k + k;
    match kind {
        ArchitectureKind::SdlJoint => f + head(h),
        ArchitectureKind::SdlSeparate => k * (f + head(h)),
        ArchitectureKind::Dann => f + head(h) + disc(h),
        ArchitectureKind::Mdnet => f + k * head(h),
        ArchitectureKind::Man => f + k * f + head(2 * h) + disc(h),
        ArchitectureKind::Can => f + k * f + head(2 * h) + disc(h + c),
    }
}

#[test]
fn parameter_counts_from_wiring() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let count = |kind, d, h, c, k, rng: &mut ChaCha8Rng| build_model(&spec(kind, d, h, c, k), rng).unwrap().param_count();
    assert_eq!(count(ArchitectureKind::SdlJoint, 10, 8, 3, 2, &mut rng), 115);
    assert_eq!(count(ArchitectureKind::Mdnet, 10, 8, 3, 2, &mut rng), 142);
    assert_eq!(count(ArchitectureKind::Man, 10, 8, 3, 2, &mut rng), 333);
    for kind in ArchitectureKind::ALL {
        for (d, h, c, k) in [(1, 1, 1, 2), (10, 8, 3, 2), (4, 6, 5, 4), (20, 3, 2, 7)] {
            assert_eq!(count(kind, d, h, c, k, &mut rng), expected_params(kind, d, h, c, k), "{kind}");
        }
    }
}

#[test]
fn single_domain_rejected() {
    let err = build_model(&spec(ArchitectureKind::Man, 3, 2, 2, 1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
    assert!(matches!(err, MdalError::Config(_)));
    let mut s = spec(ArchitectureKind::Dann, 3, 2, 2, 2);
    s.lambda = -1.0;
    assert!(build_model(&s, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn sdl_joint_ignores_domain() {
    let m = model(ArchitectureKind::SdlJoint, 1);
    let x = [0.3, -1.0, 2.0, 0.0, 0.5, 1.5, -0.2];
    assert_eq!(m.forward_predict(&x, 0).unwrap(), m.forward_predict(&x, 1).unwrap());
    assert_eq!(m.forward_predict(&x, 0).unwrap(), m.forward_predict(&x, 2).unwrap());
}

#[test]
fn mdnet_shares_features_not_heads() {
    let m = model(ArchitectureKind::Mdnet, 2);
    let x = [0.3, -1.0, 2.0, 0.0, 0.5, 1.5, -0.2];
    let a = m.forward_predict(&x, 0).unwrap();
    let b = m.forward_predict(&x, 1).unwrap();
    assert_eq!(a.shared, b.shared);
    assert_ne!(a.probs, b.probs);
}

#[test]
fn zero_weights_give_uniform_probs() {
    let mut m = model(ArchitectureKind::Man, 3);
    let zeros = vec![0.0; m.param_count()];
    m.set_flat_params(&zeros).unwrap();
    let t = m.forward_predict(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 2).unwrap();
    assert!(t.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn invalid_domain_rejected() {
    let m = model(ArchitectureKind::SdlSeparate, 4);
    assert!(matches!(m.forward_predict(&[0.0; 7], 3), Err(MdalError::Input(_))));
    assert!(matches!(m.penultimate_embedding(&[0.0; 7], 9), Err(MdalError::Input(_))));
}

#[test]
fn probabilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in ArchitectureKind::ALL {
        let m = model(kind, 5);
        let x = gaussian_matrix(20, 7, &mut rng);
        let d: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let p = m.predict_proba(&x, &d, PredictionPart::Whole).unwrap();
        for r in p.iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn private_perturbation_is_local() {
    // perturbing domain j's private extractor or head never moves domain k ≠ j
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for kind in ArchitectureKind::ALL {
        let m = model(kind, 6);
        let x = gaussian_matrix(6, 7, &mut rng);
        for j in 0..3 {
            let mut p = m.clone();
            let mut flat = p.flat_params();
            for (role, range) in m.param_ranges() {
                if matches!(role, ParamRole::Private(r) if r == j)
                    || (kind.per_domain_classifiers() && role == ParamRole::Classifier(j))
                {
                    flat[range].iter_mut().for_each(|w| *w += rng.random_range(-1.0..1.0));
                }
            }
            p.set_flat_params(&flat).unwrap();
            for k in (0..3).filter(|&k| k != j) {
                let d = vec![k; 6];
                assert_eq!(
                    m.predict_proba(&x, &d, PredictionPart::Whole).unwrap(),
                    p.predict_proba(&x, &d, PredictionPart::Whole).unwrap(),
                    "{kind}: domain {k} moved after perturbing {j}"
                );
            }
        }
    }
}

#[test]
fn supervised_loss_is_instance_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in ArchitectureKind::ALL {
        let m = model(kind, 7);
        let (batch, _) = random_batches(&m, 4, &mut rng);
        let (loss, _) = m.supervised_loss(&batch).unwrap();
        let per: f64 = (0..4)
            .map(|r| {
                let t = m.forward_predict(batch.x.row(r), batch.domains[r]).unwrap();
                -t.probs[batch.labels[r]].ln()
            })
            .sum::<f64>()
            / 4.0;
        assert!((loss - per).abs() < 1e-12, "{kind}: {loss} vs {per}");
    }
}

#[test]
fn confident_instance_has_near_zero_loss() {
    let mut m = model(ArchitectureKind::SdlJoint, 8);
    let mut flat = vec![0.0; m.param_count()];
    // classifier bias is the last block: push class 1 far ahead
    let n = flat.len();
    flat[n - 2] = 40.0;
    m.set_flat_params(&flat).unwrap();
    let batch = LabeledBatch::new(Tensor2::zeros(1, 7), vec![1], vec![0]).unwrap();
    let (loss, _) = m.supervised_loss(&batch).unwrap();
    assert!(loss < 1e-15, "{loss}");
}

#[test]
fn separate_gradients_stay_in_touched_domains() {
    let m = model(ArchitectureKind::SdlSeparate, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = gaussian_matrix(4, 7, &mut rng);
    let batch = LabeledBatch::new(x, vec![0, 1, 2, 0], vec![0, 2, 0, 2]).unwrap();
    let (_, g) = m.supervised_loss(&batch).unwrap();
    for (li, role) in m.roles().iter().enumerate() {
        let touched = matches!(role, ParamRole::Private(k) | ParamRole::Classifier(k) if *k != 1);
        assert_eq!(!g.layers[li].is_zero(), touched, "{role:?}");
    }
}

#[test]
fn adversarial_loss_requires_discriminator() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for kind in [ArchitectureKind::SdlJoint, ArchitectureKind::SdlSeparate, ArchitectureKind::Mdnet] {
        let m = model(kind, 10);
        let (_, mixed) = random_batches(&m, 6, &mut rng);
        assert!(matches!(m.adversarial_loss(&mixed), Err(MdalError::Config(_))));
    }
}

#[test]
fn zero_lambda_detaches_extractor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in [ArchitectureKind::Dann, ArchitectureKind::Man, ArchitectureKind::Can] {
        let mut s = spec(kind, 7, 5, 3, 3);
        s.lambda = 0.0;
        let m = build_model(&s, &mut rng).unwrap();
        let (_, mixed) = random_batches(&m, 9, &mut rng);
        let (_, g) = m.adversarial_loss(&mixed).unwrap();
        for (li, role) in m.roles().iter().enumerate() {
            if *role == ParamRole::Discriminator {
                assert!(!g.layers[li].is_zero());
            } else {
                assert!(g.layers[li].is_zero(), "{kind} {role:?}");
            }
        }
    }
}

#[test]
fn untrained_discriminator_is_near_chance() {
    let mut s = spec(ArchitectureKind::Dann, 7, 5, 3, 2);
    s.lambda = 0.1;
    let mut m = build_model(&s, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let mut flat = m.flat_params();
    for (role, range) in m.param_ranges() {
        if role == ParamRole::Discriminator {
            flat[range].iter_mut().for_each(|w| *w = 0.0);
        }
    }
    m.set_flat_params(&flat).unwrap();
    let x = gaussian_matrix(10, 7, &mut ChaCha8Rng::seed_from_u64(12));
    let mixed = MixedBatch::new(x, (0..10).map(|i| i % 2).collect(), vec![None; 10]).unwrap();
    let (loss, _) = m.adversarial_loss(&mixed).unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn total_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for kind in ArchitectureKind::ALL {
        let m = model(kind, 13);
        let (lab, mixed) = random_batches(&m, 12, &mut rng);
        let err = total_loss_grad_check(&m, &lab, &mixed, 1e-6).unwrap();
        assert!(err < 1e-5, "{kind}: {err}");
    }
}

#[test]
fn adversarial_directions_oppose() {
    // a small step along the training gradient of D lowers the D loss;
    // the same for the shared extractor raises it (for λ > 0)
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for kind in [ArchitectureKind::Dann, ArchitectureKind::Man, ArchitectureKind::Can] {
        for trial in 0..5 {
            let m = model(kind, 100 + trial);
            let (_, mixed) = random_batches(&m, 16, &mut rng);
            let cond = m.discriminator_conditioning(&mixed).unwrap();
            let (base, g) = m.adversarial_loss_conditioned(&mixed, Some(&cond)).unwrap();
            let flat_g = g.flatten();
            for target in [ParamRole::Discriminator, ParamRole::Shared] {
                let mut p = m.clone();
                let mut w = p.flat_params();
                for (role, range) in m.param_ranges() {
                    if role == target {
                        for i in range {
                            w[i] -= 1e-4 * flat_g[i];
                        }
                    }
                }
                p.set_flat_params(&w).unwrap();
                let (after, _) = p.adversarial_loss_conditioned(&mixed, Some(&cond)).unwrap();
                match target {
                    ParamRole::Discriminator => assert!(after < base, "{kind}: D step must descend"),
                    _ => assert!(after > base, "{kind}: F step must ascend"),
                }
            }
        }
    }
}

#[test]
fn conditional_input_is_detached() {
    // changing classifier parameters must not change CAN's adversarial gradients
    // except through the conditioning values themselves
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = model(ArchitectureKind::Can, 15);
    let (_, mixed) = random_batches(&m, 10, &mut rng);
    let cond = m.discriminator_conditioning(&mixed).unwrap();
    for (r, y) in mixed.labels.iter().enumerate() {
        let row = cond.row(r);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        if let Some(y) = y {
            assert_eq!(row[*y], 1.0);
        }
    }
    let (_, g) = m.adversarial_loss(&mixed).unwrap();
    for (li, role) in m.roles().iter().enumerate() {
        if matches!(role, ParamRole::Classifier(_) | ParamRole::Private(_)) {
            assert!(g.layers[li].is_zero(), "{role:?}");
        }
    }
}

#[test]
fn penultimate_shapes_and_recomputation() {
    let x = [0.5, -0.5, 1.0, 2.0, -1.0, 0.0, 0.25];
    let joint = model(ArchitectureKind::SdlJoint, 16);
    assert_eq!(joint.penultimate_embedding(&x, 0).unwrap().len(), 5);
    let man = model(ArchitectureKind::Man, 16);
    let e = man.penultimate_embedding(&x, 1).unwrap();
    assert_eq!(e.len(), 10);
    // explicit layer-by-layer recomputation
    let layer_out = |name: &str| {
        let l = man.layers().iter().find(|l| l.name == name).unwrap();
        (0..l.output_dim())
            .map(|j| {
                let z: f64 = (0..l.input_dim()).map(|i| x[i] * l.weights.get(i, j)).sum::<f64>() + l.bias[j];
                z.max(0.0)
            })
            .collect::<Vec<f64>>()
    };
    let mut expect = layer_out("shared");
    expect.extend(layer_out("private1"));
    assert!(e.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-14));
}

#[test]
fn badge_embedding_cases() {
    assert!(badge_embedding(&[0.0, 1.0, 0.0], &[2.0, -1.0]).iter().all(|&v| v == 0.0));
    let e = badge_embedding(&[0.2, 0.5, 0.3], &[0.0, 0.0]);
    assert_eq!(&e[..6], &[0.0; 6]);
    let tail = &e[6..];
    assert!((tail[0] - 0.2).abs() < 1e-15 && (tail[1] + 0.5).abs() < 1e-15 && (tail[2] - 0.3).abs() < 1e-15);
}

#[test]
fn split_parts() {
    let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7];
    let m = model(ArchitectureKind::Man, 17);
    let whole = m.split_part_predict(&x, 0, PredictionPart::Whole).unwrap();
    assert_eq!(whole, m.forward_predict(&x, 0).unwrap().probs);
    let mut z = m.clone();
    let mut flat = z.flat_params();
    for (role, range) in z.param_ranges() {
        if matches!(role, ParamRole::Private(_)) {
            flat[range].iter_mut().for_each(|w| *w = 0.0);
        }
    }
    z.set_flat_params(&flat).unwrap();
    assert_eq!(
        z.split_part_predict(&x, 2, PredictionPart::Shared).unwrap(),
        z.split_part_predict(&x, 2, PredictionPart::Whole).unwrap()
    );
    let mdnet = model(ArchitectureKind::Mdnet, 17);
    assert!(matches!(
        mdnet.split_part_predict(&x, 0, PredictionPart::Shared),
        Err(MdalError::Config(_))
    ));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    for kind in ArchitectureKind::ALL {
        let m = model(kind, 18);
        let json = m.to_checkpoint_json().unwrap();
        let back = ModelGraph::from_checkpoint_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            m.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
    assert!(ModelGraph::from_checkpoint_json("{\"format\":\"x\",\"version\":1,\"model\":null}").is_err());
}

fn separable_pool(seed: u64) -> MultiDomainPool {
    // class decided by the sign of the first feature, shifted per domain
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut domains = Vec::new();
    for k in 0..2 {
        let mut x = gaussian_matrix(60, 4, &mut rng);
        let mut y = Vec::new();
        for r in 0..60 {
            let label = r % 2;
            x.set(r, 0, if label == 1 { 2.0 } else { -2.0 } + 0.3 * x.get(r, 0));
            x.set(r, 1, x.get(r, 1) + 3.0 * k as f64);
            y.push(label);
        }
        domains.push((format!("d{k}"), x, y));
    }
    let mut pool = MultiDomainPool::new(domains, 2).unwrap();
    let all: Vec<InstanceHandle> = pool.unlabeled_handles();
    pool.reveal_labels(&all).unwrap();
    pool
}

fn fit_config(max_epochs: usize) -> FitConfig {
    FitConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-2,
        lr_decay: Some(0.333),
        batch_size: 16,
        weight_decay: 1e-3,
        patience: 10,
        max_epochs,
    }
}

#[test]
fn fit_separable_data() {
    let pool = separable_pool(19);
    for kind in ArchitectureKind::ALL {
        let mut m = build_model(&spec(kind, 4, 8, 2, 2), &mut ChaCha8Rng::seed_from_u64(19)).unwrap();
        let view = TrainingView::carve(&pool, 0.2, &mut ChaCha8Rng::seed_from_u64(19)).unwrap();
        let report = fit(&mut m, &view, &fit_config(200), &mut ChaCha8Rng::seed_from_u64(20)).unwrap();
        let acc = batch_accuracy(&m, &view.train, PredictionPart::Whole).unwrap();
        assert!(acc >= 0.95, "{kind}: train accuracy {acc}");
        let best = report.best_val.unwrap();
        assert_eq!(best, report.val_history.iter().copied().fold(f64::MIN, f64::max));
        // the returned model is the best snapshot
        assert_eq!(batch_accuracy(&m, &view.val, PredictionPart::Whole).unwrap(), best);
    }
}

#[test]
fn fit_zero_epochs_is_noop() {
    let pool = separable_pool(21);
    let mut m = model(ArchitectureKind::Can, 21);
    let mut s = *m.spec();
    s.input_dim = 4;
    s.domains = 2;
    m = build_model(&s, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let before = m.clone();
    let view = TrainingView::carve(&pool, 0.2, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let rep = fit(&mut m, &view, &fit_config(0), &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    assert_eq!(m, before);
    assert!(rep.val_history.is_empty());
}

#[test]
fn fit_is_deterministic() {
    let pool = separable_pool(22);
    let run = || {
        let mut m = build_model(&spec(ArchitectureKind::Man, 4, 6, 2, 2), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let view = TrainingView::carve(&pool, 0.2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        fit(&mut m, &view, &fit_config(15), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        m.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<u64>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn fit_requires_labels_in_every_domain() {
    let pool = separable_pool(23);
    let view = TrainingView::carve(&pool, 0.2, &mut ChaCha8Rng::seed_from_u64(23)).unwrap();
    // a 3-domain model cannot be fit on a 2-domain view
    let mut m = build_model(&spec(ArchitectureKind::Mdnet, 4, 4, 2, 3), &mut ChaCha8Rng::seed_from_u64(23)).unwrap();
    assert!(matches!(
        fit(&mut m, &view, &fit_config(3), &mut ChaCha8Rng::seed_from_u64(0)),
        Err(MdalError::Training(_))
    ));
}
