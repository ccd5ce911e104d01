//! Shared tokenizer loading for the model backends.

use std::path::Path;

use crate::scorer::TokenId;
use crate::{Error, Result};

pub struct HfTokenizer {
    inner: tokenizers::Tokenizer,
}

impl HfTokenizer {
    /// Load `tokenizer.json` from the weights directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("tokenizer.json");
        let inner = tokenizers::Tokenizer::from_file(&path)
            .map_err(|e| Error::backend(format!("cannot load tokenizer {}: {e}", path.display())))?;
        Ok(HfTokenizer { inner })
    }

    /// Content token ids only; special tokens stay out so spans line up
    /// with the two-tokenization candidate location.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        let encoding = self
            .inner
            .encode(text, false)
            .map_err(|e| Error::backend(format!("tokenization failed: {e}")))?;
        Ok(encoding.get_ids().to_vec())
    }
}
