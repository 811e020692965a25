use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pool::MultiDomainPool;
use crate::error::{MdalError, Result};
use crate::nn::Tensor2;

/// JSON description of a dataset stored as one CSV file per domain.
///
/// Each CSV row is `features..., label`; a header row is optional and
/// detected by a non-numeric first line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub domains: Vec<ManifestDomain>,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDomain {
    pub name: String,
    pub path: PathBuf,
}

/// Reads a manifest file; relative CSV paths resolve against its directory.
pub fn load_manifest_file(path: &Path) -> Result<MultiDomainPool> {
    let text = fs::read_to_string(path)
        .map_err(|e| MdalError::Load(format!("{}: {e}", path.display())))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| MdalError::Load(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_manifest(&manifest, base)
}

pub fn load_manifest(manifest: &DatasetManifest, base_dir: &Path) -> Result<MultiDomainPool> {
    if manifest.domains.is_empty() {
        return Err(MdalError::Load("manifest lists no domains".into()));
    }
    let mut domains = Vec::with_capacity(manifest.domains.len());
    let mut dim: Option<usize> = None;
    for entry in &manifest.domains {
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base_dir.join(&entry.path)
        };
        let (x, y) = read_domain_csv(&path, &entry.name, manifest.classes)?;
        match dim {
            None => dim = Some(x.cols()),
            Some(d) if d != x.cols() => {
                return Err(MdalError::Load(format!(
                    "domain {} has {} features, expected {d}",
                    entry.name,
                    x.cols()
                )))
            }
            _ => {}
        }
        domains.push((entry.name.clone(), x, y));
    }
    MultiDomainPool::new(domains, manifest.classes)
}

fn read_domain_csv(path: &Path, name: &str, classes: usize) -> Result<(Tensor2, Vec<usize>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MdalError::Load(format!("domain {name} ({}): {e}", path.display())))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| MdalError::Load(format!("domain {name}: {e}")))?;
        if rec.len() < 2 {
            return Err(MdalError::Load(format!(
                "domain {name} line {}: need at least one feature and a label",
                line + 1
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue, // header
            Err(e) => {
                return Err(MdalError::Load(format!(
                    "domain {name} line {}: {e}",
                    line + 1
                )))
            }
        };
        let (feats, label) = values.split_at(values.len() - 1);
        let label = label[0];
        if label.fract() != 0.0 || label < 0.0 || label as usize >= classes {
            return Err(MdalError::Load(format!(
                "domain {name} line {}: label {label} is not a class index below {classes}",
                line + 1
            )));
        }
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(MdalError::Load(format!(
                    "domain {name} line {}: {} features, expected {w}",
                    line + 1,
                    feats.len()
                )))
            }
            _ => {}
        }
        data.extend_from_slice(feats);
        labels.push(label as usize);
    }
    let width = width.ok_or_else(|| MdalError::Load(format!("domain {name} has no rows")))?;
    Ok((Tensor2::new(labels.len(), width, data)?, labels))
}

/// Writes every domain as `<name>.csv` plus `manifest.json` into `dir`.
pub fn export_pool(pool: &MultiDomainPool, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(pool.domain_count());
    for k in 0..pool.domain_count() {
        let dom = pool.domain(k);
        let file = PathBuf::from(format!("{}.csv", dom.name()));
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        for (row, &y) in dom.features().iter_rows().zip(pool.raw_labels(k)) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(y.to_string());
            w.write_record(&fields)?;
        }
        w.flush()?;
        entries.push(ManifestDomain {
            name: dom.name().to_string(),
            path: file,
        });
    }
    let manifest = DatasetManifest {
        domains: entries,
        classes: pool.classes(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
