use std::fs;
use std::path::Path;

use mdal_cli::config::parse_list;
use mdal_cli::store::read_runs;
use mdal_cli::{cmd_plot, cmd_report, cmd_run, cmd_sweep, parse_config_str, preset, CliError, Overrides};
use mdal_core::acquisition::StrategyKind;
use mdal_core::engine::{DatasetSpec, ExperimentConfig};
use mdal_core::models::ArchitectureKind;
use mdal_core::nn::OptimizerKind;

const TINY: &str = r#"{
    "preset": "synthetic",
    "dataset": {"synthetic": {"domains": 2, "classes": 3, "dim": 4, "samples_per_domain": 60}},
    "hidden": 6,
    "max_epochs": 5,
    "budget": 40,
    "initial_size": 20,
    "al_batch": 10,
    "repeats": 2,
    "seed": 5
}"#;

fn tiny(over: &Overrides) -> ExperimentConfig {
    parse_config_str(TINY, Path::new("."), over).unwrap().experiment
}

#[test]
fn amazon_and_imageclef_presets() {
    let a = preset("amazon").unwrap();
    assert_eq!(a["learning_rate"], 1e-4);
    assert_eq!(a["batch_size"], 128);
    assert_eq!(a["weight_decay"], 0.05);
    assert_eq!(a["budget"], 8000);
    assert_eq!(a["al_batch"], 1000);
    assert!(a["lr_decay"].is_null());
    let c = preset("imageclef").unwrap();
    assert_eq!(c["lr_decay"], 0.333);
    assert_eq!(c["batch_size"], 32);
    assert_eq!(c["patience"], 25);
    assert_eq!((c["budget"].clone(), c["initial_size"].clone()), (1080.into(), 180.into()));
    assert_eq!(c["repeats"], 20);
    assert!(matches!(preset("mnist"), Err(CliError::Config(_))));
}

#[test]
fn file_overrides_only_named_fields() {
    let base = parse_config_str(r#"{"preset": "office-31", "architecture": "man", "strategy": "random",
        "dataset": {"manifest": "data/office.json"}}"#, Path::new("/data"), &Overrides::default())
    .unwrap()
    .experiment;
    let over = parse_config_str(r#"{"preset": "office-31", "architecture": "man", "strategy": "random",
        "dataset": {"manifest": "data/office.json"}, "repeats": 3}"#, Path::new("/data"), &Overrides::default())
    .unwrap()
    .experiment;
    assert_eq!(over.repeats, 3);
    assert_eq!(ExperimentConfig { repeats: base.repeats, ..over.clone() }, base);
    assert_eq!(over.optimizer, OptimizerKind::Adam);
    assert_eq!(over.dataset, DatasetSpec::Manifest("/data/data/office.json".into()));
}

#[test]
fn command_line_wins() {
    let c = tiny(&Overrides {
        seed: Some(99),
        architecture: Some(ArchitectureKind::Dann),
        strategy: Some(StrategyKind::Coreset),
        ..Default::default()
    });
    assert_eq!((c.seed, c.architecture, c.strategy), (99, ArchitectureKind::Dann, StrategyKind::Coreset));
}

#[test]
fn unknown_key_is_reported_with_its_path() {
    let text = TINY.replace("\"hidden\": 6", "\"hiden\": 6");
    // architecture and strategy are required, so pass them to reach the typo
    let over = Overrides {
        architecture: Some(ArchitectureKind::Man),
        strategy: Some(StrategyKind::Random),
        ..Default::default()
    };
    let Err(CliError::Config(msg)) = parse_config_str(&text, Path::new("."), &over) else {
        panic!("typo accepted");
    };
    assert!(msg.contains("hiden"), "{msg}");
    let text = TINY.replace("\"dim\": 4", "\"dimension\": 4");
    let Err(CliError::Config(msg)) = parse_config_str(&text, Path::new("."), &over) else {
        panic!("typo accepted");
    };
    assert!(msg.starts_with("dataset.synthetic"), "{msg}");
}

#[test]
fn invalid_values_are_config_errors() {
    let over = Overrides {
        architecture: Some(ArchitectureKind::Man),
        strategy: Some(StrategyKind::Random),
        ..Default::default()
    };
    let e = parse_config_str(&TINY.replace("\"initial_size\": 20", "\"initial_size\": 0"), Path::new("."), &over)
        .unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(parse_config_str("[1]", Path::new("."), &over).is_err());
    assert!(parse_list::<StrategyKind>("random,nope").is_err());
    assert_eq!(
        parse_list::<ArchitectureKind>("man, can").unwrap(),
        vec![ArchitectureKind::Man, ArchitectureKind::Can]
    );
}

fn run_tiny(out: &Path, arch: ArchitectureKind, strategy: StrategyKind) {
    let c = tiny(&Overrides {
        architecture: Some(arch),
        strategy: Some(strategy),
        ..Default::default()
    });
    cmd_run(&c, out, false, 1).unwrap();
}

#[test]
fn refuses_non_empty_output_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    run_tiny(&out, ArchitectureKind::SdlJoint, StrategyKind::Random);
    fs::write(out.join("notes.txt"), "keep").unwrap();
    let c = tiny(&Overrides {
        architecture: Some(ArchitectureKind::SdlJoint),
        strategy: Some(StrategyKind::Random),
        ..Default::default()
    });
    let e = cmd_run(&c, &out, false, 1).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    cmd_run(&c, &out, true, 1).unwrap();
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "keep");
}

#[test]
fn cells_of_a_sweep_share_seeds_and_costs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let c = tiny(&Overrides {
        architecture: Some(ArchitectureKind::Man),
        strategy: Some(StrategyKind::Random),
        ..Default::default()
    });
    cmd_sweep(&c, &[ArchitectureKind::Man, ArchitectureKind::Mdnet], &[StrategyKind::Random, StrategyKind::Uncertainty], &out, false, 2, true)
        .unwrap();
    let a = read_runs(&out.join("cells/man__random/runs.jsonl")).unwrap();
    let b = read_runs(&out.join("cells/mdnet__uncertainty/runs.jsonl")).unwrap();
    assert_eq!(a.len(), 2);
    for (x, y) in a.iter().zip(&b) {
        let key = |r: &mdal_core::engine::RunRecord| r.rows.iter().map(|w| (w.seed, w.cost)).collect::<Vec<_>>();
        assert_eq!(key(x), key(y));
    }
    // the warm-start checkpoint draws the same labeled set, so a shared model agrees
    let m = read_runs(&out.join("cells/man__uncertainty/runs.jsonl")).unwrap();
    assert_eq!(a[0].rows[0].micro_acc, m[0].rows[0].micro_acc);
    let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(plan["models"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), 4);
}

#[test]
fn report_of_one_cell_flags_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    run_tiny(&out, ArchitectureKind::Can, StrategyKind::Egl);
    let text = cmd_report(&out).unwrap();
    assert!(text.contains('*'), "{text}");
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "{csv}");
    assert!(lines[1].starts_with("egl,can,"));
    assert!(lines[1].ends_with(",2,true"), "{csv}");
}

#[test]
fn report_is_byte_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    run_tiny(&out, ArchitectureKind::Dann, StrategyKind::Badge);
    cmd_report(&out).unwrap();
    let first = (fs::read(out.join("report.csv")).unwrap(), fs::read(out.join("report.txt")).unwrap());
    cmd_report(&out).unwrap();
    let second = (fs::read(out.join("report.csv")).unwrap(), fs::read(out.join("report.txt")).unwrap());
    assert_eq!(first, second);
}

#[test]
fn plot_rows_match_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    run_tiny(&out, ArchitectureKind::SdlSeparate, StrategyKind::Coreset);
    let svgs = cmd_plot(&out).unwrap();
    assert_eq!(svgs.len(), 1);
    let csv = fs::read_to_string(out.join("cells/sdl-separate__coreset/curve.csv")).unwrap();
    // header plus costs 20, 30, 40
    assert_eq!(csv.lines().count(), 4, "{csv}");
    assert!(fs::read_to_string(&svgs[0]).unwrap().starts_with("<svg"));
}

#[test]
fn report_without_results_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(cmd_report(tmp.path()).is_err());
    assert!(cmd_plot(tmp.path()).is_err());
}
