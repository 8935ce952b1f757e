//! Resumable checkpoints: a JSON header with the server model plus one state
//! snapshot CSV per client.

use std::fs;
use std::path::{Path, PathBuf};

use flr_core::state::PseudoLabelStore;
use flr_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::formats;

/// Directory name under the run directory.
pub const DIR: &str = "checkpoint";
const HEADER: &str = "checkpoint.json";

/// Contents of `checkpoint.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// First round that has not run yet.
    pub next_round: usize,
    /// SHA-256 of the resolved configuration the run was started with.
    pub config_sha256: String,
    /// Layer sizes of `params`.
    pub layer_sizes: Vec<usize>,
    /// Flat server parameters.
    pub params: Vec<f64>,
    /// State snapshot file of each client, relative to the checkpoint dir.
    pub state_files: Vec<String>,
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// First round that has not run yet.
    pub next_round: usize,
    /// Hash of the configuration that produced it.
    pub config_sha256: String,
    /// Server model.
    pub server: ModelParams,
    /// Per-client pseudo-label stores.
    pub stores: Vec<PseudoLabelStore>,
}

/// Path of the checkpoint header inside a run directory.
pub fn header_path(run_dir: &Path) -> PathBuf {
    run_dir.join(DIR).join(HEADER)
}

/// Writes a checkpoint, replacing any previous one. The header is written
/// last through a rename so a crash never leaves a header pointing at
/// missing state.
pub fn save(
    run_dir: &Path,
    next_round: usize,
    config_sha256: &str,
    server: &ModelParams,
    stores: &[PseudoLabelStore],
    classes: usize,
) -> Result<()> {
    let dir = run_dir.join(DIR);
    fs::create_dir_all(&dir).map_err(|e| SimError::io(&dir, e))?;
    let mut state_files = Vec::with_capacity(stores.len());
    for (k, store) in stores.iter().enumerate() {
        let name = format!("state_{k}.csv");
        formats::write_state(&dir.join(&name), store, classes)?;
        state_files.push(name);
    }
    let header = CheckpointHeader {
        next_round,
        config_sha256: config_sha256.to_string(),
        layer_sizes: server.layer_sizes().to_vec(),
        params: server.values().to_vec(),
        state_files,
    };
    let text = serde_json::to_string_pretty(&header)
        .map_err(|e| SimError::format(dir.join(HEADER), e.to_string()))?;
    let tmp = dir.join(format!("{HEADER}.tmp"));
    fs::write(&tmp, text).map_err(|e| SimError::io(&tmp, e))?;
    let path = dir.join(HEADER);
    fs::rename(&tmp, &path).map_err(|e| SimError::io(&path, e))
}

/// Loads the checkpoint of a run directory.
pub fn load(run_dir: &Path, classes: usize) -> Result<Checkpoint> {
    let path = header_path(run_dir);
    let text = fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
    let header: CheckpointHeader =
        serde_json::from_str(&text).map_err(|e| SimError::format(&path, e.to_string()))?;
    let server = ModelParams::from_values(&header.layer_sizes, header.params)?;
    let dir = run_dir.join(DIR);
    let stores = header
        .state_files
        .iter()
        .map(|name| formats::read_state(&dir.join(name), classes))
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        next_round: header.next_round,
        config_sha256: header.config_sha256,
        server,
        stores,
    })
}
