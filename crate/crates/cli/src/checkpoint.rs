//! Versioned JSON checkpoints of both trained networks.

use crate::config::hex_digest;
use crate::error::{CliError, Result};
use afsim_core::rl::{ActionGrid, LstmQNet};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "afsim-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointBody {
    pub format: String,
    pub version: u32,
    /// Hash of the resolved config that produced the networks.
    pub config_hash: String,
    pub scenario: String,
    pub episodes_trained: usize,
    pub grid: ActionGrid,
    pub av: LstmQNet,
    pub att: LstmQNet,
}

/// On-disk form: the body plus the SHA-256 of its canonical JSON text.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    sha256: String,
    body: CheckpointBody,
}

impl CheckpointBody {
    pub fn new(config_hash: String, scenario: String, episodes_trained: usize, grid: ActionGrid, av: LstmQNet, att: LstmQNet) -> Self {
        CheckpointBody { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, config_hash, scenario, episodes_trained, grid, av, att }
    }

    fn digest(&self) -> Result<String> {
        let text = serde_json::to_string(self).map_err(|e| CliError::Numerical(format!("cannot encode checkpoint: {e}")))?;
        Ok(hex_digest(text.as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if !(self.av.is_finite() && self.att.is_finite()) {
            return Err(CliError::Numerical("refusing to save non-finite network parameters".into()));
        }
        let file = CheckpointFile { sha256: self.digest()?, body: self.clone() };
        let text = serde_json::to_string(&file).map_err(|e| CliError::Numerical(format!("cannot encode checkpoint: {e}")))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    /// Loads and verifies format, version, hash, and network shapes.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))?;
        let body = file.body;
        if body.format != CHECKPOINT_FORMAT || body.version != CHECKPOINT_VERSION {
            return Err(CliError::config("checkpoint", format!("unsupported checkpoint {} v{}", body.format, body.version)));
        }
        if body.digest()? != file.sha256 {
            return Err(CliError::config("checkpoint", format!("{}: content hash mismatch", path.display())));
        }
        if body.av.actions() != body.grid.av_actions().len() || body.att.actions() != body.grid.att_actions().len() {
            return Err(CliError::config("checkpoint", "network sizes do not match the stored grid"));
        }
        Ok(body)
    }

    /// Errors unless `grid` is exactly the grid the networks were trained on.
    pub fn check_grid(&self, grid: &ActionGrid) -> Result<()> {
        if &self.grid != grid {
            return Err(CliError::config(
                "grid",
                format!(
                    "checkpoint grid ({} follower x {} attacker actions) differs from the configured grid ({} x {})",
                    self.grid.av_actions().len(),
                    self.grid.att_actions().len(),
                    grid.av_actions().len(),
                    grid.att_actions().len()
                ),
            ));
        }
        Ok(())
    }
}
