use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::DinesModel;
use crate::error::{Error, Result};
use crate::numerics::ParamStore;

pub const CHECKPOINT_SCHEMA: u32 = 1;

/// Serialized trained model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub node_count: usize,
    pub config: TrainConfig,
    pub model: DinesModel,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn new(node_count: usize, config: TrainConfig, model: DinesModel, params: ParamStore) -> Self {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA,
            node_count,
            config,
            model,
            params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        let version = raw.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(CHECKPOINT_SCHEMA)) {
            return Err(Error::Schema(format!(
                "checkpoint schema {version:?}, expected {CHECKPOINT_SCHEMA}"
            )));
        }
        let ckpt: Checkpoint = serde_json::from_value(raw)?;
        ckpt.check()?;
        Ok(ckpt)
    }

    /// Fails unless the checkpoint matches a graph of `n` nodes.
    pub fn expect_nodes(&self, n: usize) -> Result<()> {
        if self.node_count != n {
            return Err(Error::shape("checkpoint", &[self.node_count], &[n]));
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        self.config.validate()?;
        let p = self.model.encoder.params();
        if p.init_w.0 >= self.params.len() {
            return Err(Error::Schema("checkpoint parameters incomplete".into()));
        }
        let w = self.params.get(p.init_w).shape().to_vec();
        let expect = [self.config.encoder.d_in, self.config.encoder.widths[0]];
        if w != expect {
            return Err(Error::shape("checkpoint", &w, &expect));
        }
        Ok(())
    }
}
