use std::path::Path;

use serde::{Deserialize, Serialize};

use super::replay::ReplayBuffer;
use super::train::Learner;
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Everything needed to resume a training stream bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<P> {
    pub format_version: u32,
    pub learner: Learner,
    pub rng: SimRng,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplayBuffer>,
    /// Caller-defined run progress.
    pub progress: P,
}

impl<P: Serialize + for<'de> Deserialize<'de>> Checkpoint<P> {
    pub fn new(learner: Learner, rng: SimRng, replay: Option<ReplayBuffer>, progress: P) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            learner,
            rng,
            replay,
            progress,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let version: serde_json::Value = serde_json::from_str(text)?;
        match version.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_FORMAT_VERSION as u64 => {}
            other => {
                return Err(Error::Config(format!(
                    "checkpoint format_version {other:?} is not supported (expected {CHECKPOINT_FORMAT_VERSION})"
                )))
            }
        }
        Ok(serde_json::from_value(version)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
