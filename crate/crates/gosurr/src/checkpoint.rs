//! Versioned, checksummed JSON checkpoints of an adaptive run.
//!
//! A checkpoint holds the configuration and the [`AdaptiveState`] before the
//! next iteration's analysis. Every random stream of a run is derived from
//! the master seed and the iteration index, so the state plus the seed is
//! all the random-number state there is.

use std::path::Path;

use gosurr_core::driver::AdaptiveState;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::format::{to_json_bytes, write_atomic};

pub const FORMAT: &str = "gosurr-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub state: AdaptiveState,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format: String,
    version: u32,
    sha256: String,
    payload: Value,
}

fn digest(payload: &Value) -> String {
    let bytes = to_json_bytes(payload, false).expect("values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = serde_json::to_value(self).expect("checkpoint serializes");
        let env = Envelope {
            format: FORMAT.into(),
            version: VERSION,
            sha256: digest(&payload),
            payload,
        };
        to_json_bytes(&env, true).expect("values always serialize")
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> CliResult<Self> {
        let bad = |msg: String| CliError::Integrity {
            path: path.to_path_buf(),
            msg,
        };
        let env: Envelope = serde_json::from_slice(bytes).map_err(|e| bad(format!("not a checkpoint: {e}")))?;
        if env.format != FORMAT {
            return Err(bad(format!("format `{}` is not `{FORMAT}`", env.format)));
        }
        if env.version != VERSION {
            return Err(bad(format!(
                "checkpoint version {} cannot be read by this build (version {VERSION})",
                env.version
            )));
        }
        let actual = digest(&env.payload);
        if actual != env.sha256 {
            return Err(bad(format!("checksum mismatch: recorded {}, computed {actual}", env.sha256)));
        }
        serde_json::from_value(env.payload).map_err(|e| bad(format!("malformed payload: {e}")))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
