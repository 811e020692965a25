//! Config files, named presets and command-line overrides.

use std::path::{Path, PathBuf};

use mdal_core::acquisition::StrategyKind;
use mdal_core::engine::{DatasetSpec, ExperimentConfig};
use mdal_core::models::ArchitectureKind;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Names accepted by `--preset` and the `preset` config key.
pub const PRESETS: [&str; 7] = [
    "amazon",
    "office-31",
    "office-home",
    "imageclef",
    "digits",
    "pacs",
    "synthetic",
];

/// Preset fields as a JSON object. Dataset presets other than `synthetic`
/// carry hyperparameters only; the data comes from a manifest.
pub fn preset(name: &str) -> Result<Map<String, Value>, CliError> {
    let row = |opt: &str, lr: f64, decay: Option<f64>, batch: usize, wd: f64, patience: usize, b_total: usize, init: usize, b: usize, repeats: usize| {
        json!({
            "optimizer": opt,
            "learning_rate": lr,
            "lr_decay": decay,
            "batch_size": batch,
            "weight_decay": wd,
            "patience": patience,
            "lambda": 0.1,
            "budget": b_total,
            "initial_size": init,
            "al_batch": b,
            "repeats": repeats,
            "hidden": 64,
            "max_epochs": 100,
            "seed": 0,
        })
    };
    let v = match name {
        "amazon" => row("adam", 1e-4, None, 128, 0.05, 10, 8000, 1000, 1000, 10),
        "office-31" => row("adam", 3e-3, Some(0.333), 128, 0.001, 30, 2400, 400, 400, 10),
        "office-home" => row("adam", 1e-4, None, 128, 0.001, 10, 9000, 1000, 2000, 5),
        "imageclef" => row("adam", 3e-3, Some(0.333), 32, 0.001, 25, 1080, 180, 180, 20),
        "digits" => row("sgd", 1e-2, Some(0.1), 128, 0.001, 15, 18000, 2000, 4000, 5),
        "pacs" => row("sgd", 1e-3, Some(0.1), 32, 0.001, 15, 8500, 500, 2000, 3),
        "synthetic" => {
            let mut v = row("adam", 1e-2, None, 32, 0.001, 10, 300, 60, 40, 10);
            v["dataset"] = json!({
                "synthetic": {
                    "domains": 3,
                    "classes": 4,
                    "dim": 20,
                    "samples_per_domain": 750,
                    "noise": 1.0,
                    "clusters_per_class": 3,
                    "class_separation": 5.0,
                    "shift_norm": 2.0,
                    "rotation": 0.0,
                    "conflict_fraction": 0.0
                }
            });
            v["seed"] = json!(42);
            v
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    if matches!(name, "digits" | "pacs") {
        log::warn!("preset '{name}' was tuned for deep convolutional backbones; here it drives the shallow models");
    }
    match v {
        Value::Object(m) => Ok(m),
        _ => unreachable!("presets are objects"),
    }
}

/// Values given on the command line; they win over the file and the preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub architecture: Option<ArchitectureKind>,
    pub strategy: Option<StrategyKind>,
}

/// A resolved config plus the file-level keys that are not experiment fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub out: Option<PathBuf>,
}

fn merge(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            // a dataset block replaces the preset's dataset wholesale
            (Some(Value::Object(b)), Value::Object(t)) if k != "dataset" => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Resolves a config document. Preset fields come first, the document's own
/// fields override them, and `overrides` are applied last. Relative manifest
/// paths are taken relative to `base_dir`.
pub fn resolve_config(doc: Value, base_dir: &Path, overrides: &Overrides) -> Result<ConfigFile, CliError> {
    let Value::Object(mut doc) = doc else {
        return Err(CliError::Config("config must be a JSON object".into()));
    };
    let preset_name = match (overrides.preset.clone(), doc.remove("preset")) {
        (Some(p), _) => Some(p),
        (None, Some(Value::String(p))) => Some(p),
        (None, Some(other)) => return Err(CliError::Config(format!("preset: expected a string, got {other}"))),
        (None, None) => None,
    };
    let out = match doc.remove("out") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(base_dir.join(s)),
        Some(other) => return Err(CliError::Config(format!("out: expected a path string, got {other}"))),
    };
    let mut fields = match &preset_name {
        Some(p) => preset(p)?,
        None => Map::new(),
    };
    merge(&mut fields, doc);
    if let Some(seed) = overrides.seed {
        fields.insert("seed".into(), json!(seed));
    }
    if let Some(a) = overrides.architecture {
        fields.insert("architecture".into(), json!(a));
    }
    if let Some(s) = overrides.strategy {
        fields.insert("strategy".into(), json!(s));
    }
    let mut experiment: ExperimentConfig = serde_path_to_error::deserialize(Value::Object(fields)).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })?;
    if let DatasetSpec::Manifest(p) = &mut experiment.dataset {
        if p.is_relative() {
            *p = base_dir.join(&*p);
        }
    }
    experiment.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(ConfigFile { experiment, out })
}

pub fn parse_config_str(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<ConfigFile, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    resolve_config(doc, base_dir, overrides)
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, overrides)
}

/// Config from an optional file and an optional preset; with neither, an error.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ConfigFile, CliError> {
    match path {
        Some(p) => parse_config(p, overrides),
        None if overrides.preset.is_some() => resolve_config(Value::Object(Map::new()), Path::new("."), overrides),
        None => Err(CliError::Config("pass --config FILE or --preset NAME".into())),
    }
}

/// Parses a comma-separated list such as `man,can`.
pub fn parse_list<T: std::str::FromStr<Err = mdal_core::MdalError>>(csv: &str) -> Result<Vec<T>, CliError> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}
