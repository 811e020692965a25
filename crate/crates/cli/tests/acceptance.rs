//! Acceptance criteria 1 to 10. Every criterion prints one PASS/FAIL line;
//! the hard ones are asserted after all lines are out. Criterion 10 only warns.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use mdal_cli::{cmd_run, preset, resolve_config, Overrides};
use mdal_core::acquisition::StrategyKind;
use mdal_core::engine::{init_experiment, load_dataset, run_experiment_on, ExperimentConfig};
use mdal_core::metrics::{ablation_report, aulc, domain_probe, ProbeConfig};
use mdal_core::models::{ArchitectureKind, PredictionPart};
use mdal_core::nn::Tensor2;
use mdal_core::rng::substream;
use mdal_core::selftest::{check_aulc, check_badge, check_coreset, check_egl, check_gradients, first_batch_elbows};

struct Line {
    id: usize,
    passed: bool,
    soft: bool,
    detail: String,
}

fn synthetic(arch: ArchitectureKind, strategy: StrategyKind) -> ExperimentConfig {
    let doc = serde_json::Value::Object(preset("synthetic").unwrap());
    resolve_config(
        doc,
        Path::new("."),
        &Overrides {
            architecture: Some(arch),
            strategy: Some(strategy),
            ..Default::default()
        },
    )
    .unwrap()
    .experiment
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn c1() -> Line {
    let (res, t) = timed(|| check_gradients(7));
    let v = res.unwrap();
    let worst = v.iter().map(|p| p.1).fold(0.0, f64::max);
    let detail = v.iter().map(|(k, e)| format!("{k}={e:.1e}")).collect::<Vec<_>>().join(" ");
    Line {
        id: 1,
        passed: worst < 1e-5 && t < Duration::from_secs(10),
        soft: false,
        detail: format!("max rel err {worst:.2e} in {:.2}s [{detail}]", t.as_secs_f64()),
    }
}

fn c2() -> Line {
    let (res, t) = timed(|| check_coreset(50, 11));
    let m = res.unwrap();
    Line {
        id: 2,
        passed: m == 0 && t < Duration::from_secs(5),
        soft: false,
        detail: format!("{m} of 50 pools differ from the brute-force oracle, {:.2}s", t.as_secs_f64()),
    }
}

fn c3() -> Line {
    let w = check_egl(100, 13).unwrap();
    Line {
        id: 3,
        passed: w <= 1e-10,
        soft: false,
        detail: format!("max |closed form - per-class backward| {w:.2e} over 100 instances"),
    }
}

fn c4() -> Line {
    let w = check_badge(20, 17).unwrap();
    Line {
        id: 4,
        passed: w <= 1e-6,
        soft: false,
        detail: format!("max |embedding - finite difference| {w:.2e}"),
    }
}

fn c5() -> Line {
    let v = check_aulc().unwrap();
    Line {
        id: 5,
        passed: v == [0.8, 0.5, 0.625],
        soft: false,
        detail: format!("{:.6} {:.6} {:.6}", v[0], v[1], v[2]),
    }
}

fn c6() -> Line {
    let mut cfg = synthetic(ArchitectureKind::Man, StrategyKind::Badge);
    cfg.repeats = 2;
    let tmp = tempfile::tempdir().unwrap();
    let read = |name: &str| {
        let out = tmp.path().join(name);
        cmd_run(&cfg, &out, false, 1).unwrap();
        fs::read(out.join("cells/man__badge/runs.jsonl")).unwrap()
    };
    let (a, b) = (read("a"), read("b"));
    Line {
        id: 6,
        passed: !a.is_empty() && a == b,
        soft: false,
        detail: format!("runs.jsonl {} vs {} bytes, identical: {}", a.len(), b.len(), a == b),
    }
}

fn c7() -> Line {
    let t = Instant::now();
    let mean = |s: StrategyKind| {
        let cfg = synthetic(ArchitectureKind::Man, s);
        let base = load_dataset(&cfg.dataset, cfg.seed).unwrap();
        let r = run_experiment_on(&cfg, &base, workers()).unwrap();
        assert!(r.failure.is_none());
        let a: Vec<f64> = r.runs.iter().map(|x| aulc(&x.curve().unwrap()).unwrap().value).collect();
        a.iter().sum::<f64>() / a.len() as f64
    };
    let (u, r) = (mean(StrategyKind::Uncertainty), mean(StrategyKind::Random));
    let t = t.elapsed();
    Line {
        id: 7,
        passed: u - r >= 0.01 && t < Duration::from_secs(300),
        soft: false,
        detail: format!("MAN AULC uncertainty {u:.4}, random {r:.4}, gap {:.4}, {:.1}s", u - r, t.as_secs_f64()),
    }
}

fn c8() -> Line {
    let mut cfg = synthetic(ArchitectureKind::Man, StrategyKind::Uncertainty);
    cfg.repeats = 5;
    let base = load_dataset(&cfg.dataset, cfg.seed).unwrap();
    let rep = ablation_report(&cfg, &base, workers()).unwrap();
    let gap = |i: usize| rep.whole.points()[i].1 - rep.shared.points()[i].1;
    let (first, last) = (gap(0), gap(rep.whole.len() - 1));
    Line {
        id: 8,
        passed: last >= first,
        soft: false,
        detail: format!("whole - shared gap {first:.4} at first checkpoint, {last:.4} at last"),
    }
}

// Domain-probe accuracy on the test-split features of a model trained on 300 labels.
fn probe_accuracy(arch: ArchitectureKind, seed: u64) -> f64 {
    let mut cfg = synthetic(arch, StrategyKind::Random);
    cfg.seed = seed;
    (cfg.initial_size, cfg.budget) = (300, 300);
    let base = load_dataset(&cfg.dataset, cfg.seed).unwrap();
    let state = init_experiment(&cfg, 0, &base).unwrap();
    let (mut rows, mut domains) = (Vec::new(), Vec::new());
    for k in 0..state.pool.domain_count() {
        let idx = state.pool.indices(k, mdal_core::data::Split::Test);
        let x = state.pool.domain(k).features().select_rows(&idx);
        let tr = state.model.trace(&x, k, PredictionPart::Whole).unwrap();
        let f = match arch {
            ArchitectureKind::Man => tr.shared.unwrap(),
            _ => tr.penultimate,
        };
        for i in 0..f.rows() {
            rows.push(f.row(i).to_vec());
            domains.push(k);
        }
    }
    let feats = Tensor2::from_rows(&rows).unwrap();
    let mut rng = substream(seed, "probe", 0);
    domain_probe(&feats, &domains, state.pool.domain_count(), &ProbeConfig::default(), &mut rng).unwrap()
}

fn c9() -> Line {
    let seeds = 42..47u64;
    let n = seeds.clone().count() as f64;
    let man = seeds.clone().map(|s| probe_accuracy(ArchitectureKind::Man, s)).sum::<f64>() / n;
    let sep = seeds.map(|s| probe_accuracy(ArchitectureKind::SdlSeparate, s)).sum::<f64>() / n;
    Line {
        id: 9,
        passed: man <= sep - 0.05,
        soft: false,
        detail: format!("domain probe accuracy MAN shared {man:.3}, sdl-separate {sep:.3}"),
    }
}

fn c10() -> Line {
    let cfg = synthetic(ArchitectureKind::Man, StrategyKind::Uncertainty);
    let base = load_dataset(&cfg.dataset, cfg.seed).unwrap();
    let pairs = first_batch_elbows(&cfg, &base, 5).unwrap();
    let n = pairs.len() as f64;
    let u = pairs.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let b = pairs.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    Line {
        id: 10,
        passed: u >= 0.5 * b,
        soft: true,
        detail: format!("mean elbow k* uncertainty {u:.1}, badge {b:.1}"),
    }
}

fn main() {
    let checks: [fn() -> Line; 10] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10];
    let mut lines = Vec::new();
    for c in checks {
        let l = c();
        let tag = match (l.passed, l.soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft, warning only)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2}: {tag} {}", l.id, l.detail);
        lines.push(l);
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.passed && !l.soft).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
