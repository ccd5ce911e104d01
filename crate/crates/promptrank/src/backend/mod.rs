//! Model backends implementing the scoring contract.
//!
//! `StubBackend` is deterministic and seedable for tests and smoke
//! runs. The `candle` feature adds T5 and BART adapters that load
//! safetensors weights plus a tokenizer file.

mod stub;

#[cfg(feature = "candle")]
pub mod bart;
#[cfg(feature = "candle")]
pub mod t5;
#[cfg(feature = "candle")]
mod tok;

pub use stub::{ConstantBackend, StubBackend};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::scorer::Backend;
use crate::{Error, Result};

/// Which model family to load, plus its weights directory. The string
/// form is `stub`, `stub:<seed>`, `t5`, or `bart`; the latter two need
/// a weights path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub family: String,
    pub weights: Option<PathBuf>,
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec {
            family: "stub:42".to_string(),
            weights: None,
        }
    }
}

impl BackendSpec {
    pub fn new(family: &str, weights: Option<PathBuf>) -> Self {
        BackendSpec {
            family: family.to_string(),
            weights,
        }
    }

    /// Build a fresh backend session. Each pipeline worker calls this
    /// once; sessions are not shared across threads.
    pub fn create(&self) -> Result<Box<dyn Backend>> {
        if let Some(seed) = self.family.strip_prefix("stub") {
            let seed: u64 = match seed.strip_prefix(':') {
                None if seed.is_empty() => 42,
                Some(s) => s
                    .parse()
                    .map_err(|_| Error::Config(format!("bad stub seed {s:?}")))?,
                _ => return Err(Error::Config(format!("unknown backend {:?}", self.family))),
            };
            return Ok(Box::new(StubBackend::new(seed)));
        }
        match self.family.as_str() {
            #[cfg(feature = "candle")]
            "t5" => {
                let dir = self.weights_dir()?;
                Ok(Box::new(t5::T5Backend::load(&dir)?))
            }
            #[cfg(feature = "candle")]
            "bart" => {
                let dir = self.weights_dir()?;
                Ok(Box::new(bart::BartBackend::load(&dir)?))
            }
            #[cfg(not(feature = "candle"))]
            "t5" | "bart" => Err(Error::Config(
                "built without the `candle` feature; only the stub backend is available".into(),
            )),
            other => Err(Error::Config(format!("unknown backend family {other:?}"))),
        }
    }

    #[cfg_attr(not(feature = "candle"), allow(dead_code))]
    fn weights_dir(&self) -> Result<PathBuf> {
        self.weights.clone().ok_or_else(|| {
            Error::Config(format!("backend {:?} requires --weights", self.family))
        })
    }
}
