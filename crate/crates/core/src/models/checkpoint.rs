//! Versioned model checkpoints: a self-describing JSON file holding the model
//! config plus every parameter as (name, shape, values). JSON f64s round-trip
//! exactly, so a loaded model reproduces forward outputs bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Forecaster, ModelConfig};

const FORMAT: &str = "msmixer-checkpoint";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SavedParam {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    params: Vec<SavedParam>,
}

pub fn save_checkpoint(model: &dyn Forecaster, path: impl AsRef<Path>) -> Result<()> {
    let file = CheckpointFile {
        format: FORMAT.to_owned(),
        version: VERSION,
        config: model.model_config(),
        params: model
            .store()
            .entries()
            .iter()
            .map(|e| SavedParam {
                name: e.name.clone(),
                rows: e.value.rows(),
                cols: e.value.cols(),
                data: e.value.data().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&file)?;
    fs::write(path.as_ref(), json)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Box<dyn Forecaster>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    let file: CheckpointFile =
        serde_json::from_str(&raw).map_err(|e| Error::load(path, format!("bad checkpoint: {e}")))?;
    if file.format != FORMAT {
        return Err(Error::load(path, format!("unknown format '{}'", file.format)));
    }
    if file.version != VERSION {
        return Err(Error::load(
            path,
            format!("unsupported checkpoint version {}", file.version),
        ));
    }
    let mut model = file.config.build(0)?;
    let store = model.store_mut();
    if store.len() != file.params.len() {
        return Err(Error::load(
            path,
            format!(
                "checkpoint has {} parameters, model expects {}",
                file.params.len(),
                store.len()
            ),
        ));
    }
    for (id, saved) in store.ids().collect::<Vec<_>>().into_iter().zip(&file.params) {
        if store.name(id) != saved.name {
            return Err(Error::load(
                path,
                format!("parameter '{}' does not match expected '{}'", saved.name, store.name(id)),
            ));
        }
        let value = store.value_mut(id);
        if value.shape() != (saved.rows, saved.cols) {
            return Err(Error::load(
                path,
                format!(
                    "parameter '{}' has shape {}x{}, expected {}x{}",
                    saved.name,
                    saved.rows,
                    saved.cols,
                    value.rows(),
                    value.cols()
                ),
            ));
        }
        value.data_mut().copy_from_slice(&saved.data);
    }
    Ok(model)
}
