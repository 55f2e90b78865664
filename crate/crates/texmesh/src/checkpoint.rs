//! Versioned JSON checkpoints: model config, parameters and, optionally,
//! the full training state needed to resume.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use texmesh_core::model::{Model, ModelConfig};
use texmesh_core::nn::params::ParamStore;
use texmesh_core::train::TrainState;

use crate::error::{Error, Result};

pub const FORMAT: &str = "texmesh-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub params: ParamStore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainState>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self::new(model.config().clone(), model.store().clone(), None)
    }

    /// Current parameters plus everything needed to resume.
    pub fn from_state(state: TrainState) -> Self {
        Self::new(state.model.clone(), state.params.clone(), Some(state))
    }

    fn new(model: ModelConfig, params: ParamStore, training: Option<TrainState>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            model,
            params,
            training,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model::from_store(self.model.clone(), &self.params)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        // Write-then-rename keeps the previous checkpoint intact if interrupted.
        let tmp = path.with_extension("json.tmp");
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|source| Error::Json {
            path: tmp.clone(),
            source,
        })?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        drop(w);
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Self = serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        Ok(ck)
    }

    /// Errors unless `expected` describes the same architecture (dropout may differ).
    pub fn check_compatible(&self, expected: &ModelConfig) -> Result<()> {
        let mut a = self.model.clone();
        a.dropout = expected.dropout;
        if &a != expected {
            return Err(texmesh_core::Error::ConfigMismatch(format!(
                "checkpoint model {:?} does not match configured model {expected:?}",
                self.model
            ))
            .into());
        }
        Ok(())
    }
}
