//! Self-describing JSON checkpoint: layout, every tensor (row-major f64),
//! batch-norm running statistics and the standardization fitted on the
//! training split.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ResSurvParams;
use crate::dataset::StandardizationParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "ressurv-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub feature_names: Vec<String>,
    pub standardization: StandardizationParams,
    pub params: ResSurvParams,
}

impl Checkpoint {
    pub fn new(
        params: ResSurvParams,
        standardization: StandardizationParams,
        feature_names: Vec<String>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            feature_names,
            standardization,
            params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format `{}`, expected `{CHECKPOINT_FORMAT}`",
                ck.format
            )));
        }
        let p = ck.params.layout.input_dim;
        if ck.standardization.means.len() != p || ck.feature_names.len() != p {
            return Err(Error::Checkpoint(format!(
                "network expects {p} features but checkpoint lists {}",
                ck.feature_names.len()
            )));
        }
        Ok(ck)
    }
}
