use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::ModelGraph;
use crate::error::{MdalError, Result};

const FORMAT: &str = "mdal-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

impl ModelGraph {
    /// JSON checkpoint holding the architecture, dims and every parameter array.
    /// Floats round-trip exactly.
    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Envelope {
            format: FORMAT.into(),
            version: VERSION,
            model: self,
        })?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<ModelGraph> {
        let env: Envelope<ModelGraph> = serde_json::from_str(text)?;
        if env.format != FORMAT {
            return Err(MdalError::Input(format!("not a model checkpoint: format '{}'", env.format)));
        }
        if env.version != VERSION {
            return Err(MdalError::Input(format!(
                "unsupported checkpoint version {} (expected {VERSION})",
                env.version
            )));
        }
        env.model.validate()?;
        Ok(env.model)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<ModelGraph> {
        Self::from_checkpoint_json(&fs::read_to_string(path)?)
    }
}
