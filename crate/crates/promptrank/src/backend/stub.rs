//! Deterministic test backends.

use crate::scorer::{Backend, TokenId};
use crate::Result;

const VOCAB: usize = 64;
const EOS: TokenId = 1;

/// Seedable stub model. Tokenization chunks lowercased words into
/// pieces of up to four characters; log-probabilities are a pure hash
/// of (seed, encoder input, decoder history, token), so scores are
/// reproducible and independent of batch partitioning.
#[derive(Debug, Clone)]
pub struct StubBackend {
    seed: u64,
    encoder_digest: u64,
}

impl StubBackend {
    pub fn new(seed: u64) -> Self {
        StubBackend {
            seed,
            encoder_digest: 0,
        }
    }
}

fn fnv1a(init: u64, bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h = if init == 0 { 0xcbf29ce484222325 } else { init };
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn hash_ids(init: u64, ids: &[TokenId]) -> u64 {
    fnv1a(init, ids.iter().flat_map(|id| id.to_le_bytes()))
}

impl Backend for StubBackend {
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut ids = Vec::new();
        for word in crate::preprocess::tokenize(&text.to_lowercase()) {
            let bytes = word.as_bytes();
            for piece in bytes.chunks(4) {
                let h = fnv1a(0, piece.iter().copied());
                ids.push((h % (VOCAB as u64 - 2)) as TokenId + 2);
            }
        }
        Ok(ids)
    }

    fn encode(&mut self, encoder_ids: &[TokenId]) -> Result<()> {
        self.encoder_digest = hash_ids(self.seed | 1, encoder_ids);
        Ok(())
    }

    fn decode_batch(&mut self, decoder_batch: &[Vec<TokenId>]) -> Result<Vec<Vec<Vec<f32>>>> {
        let mut out = Vec::with_capacity(decoder_batch.len());
        for ids in decoder_batch {
            let mut rows = Vec::with_capacity(ids.len());
            for i in 0..ids.len() {
                let ctx = hash_ids(self.encoder_digest, &ids[..i]);
                let mut logits = [0.0f64; VOCAB];
                for (v, logit) in logits.iter_mut().enumerate() {
                    let h = fnv1a(ctx, (v as u32).to_le_bytes());
                    // map hash to [0, 4)
                    *logit = (h % 4096) as f64 / 1024.0;
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
                rows.push(logits.iter().map(|l| (l - log_z) as f32).collect());
            }
            out.push(rows);
        }
        Ok(out)
    }

    fn eos_id(&self) -> Option<TokenId> {
        Some(EOS)
    }
}

/// Backend assigning one fixed log-probability to every token at every
/// position. Useful when a test needs hand-computable scores.
#[derive(Debug, Clone)]
pub struct ConstantBackend {
    pub logprob: f32,
}

impl ConstantBackend {
    pub fn new(logprob: f32) -> Self {
        assert!(logprob <= 0.0, "log-probabilities cannot be positive");
        ConstantBackend { logprob }
    }
}

impl Backend for ConstantBackend {
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        // one token per whitespace word
        Ok(crate::preprocess::tokenize(&text.to_lowercase())
            .iter()
            .map(|w| (fnv1a(0, w.bytes()) % 1000) as TokenId)
            .collect())
    }

    fn encode(&mut self, _encoder_ids: &[TokenId]) -> Result<()> {
        Ok(())
    }

    fn decode_batch(&mut self, decoder_batch: &[Vec<TokenId>]) -> Result<Vec<Vec<Vec<f32>>>> {
        Ok(decoder_batch
            .iter()
            .map(|ids| vec![vec![self.logprob; 1000]; ids.len()])
            .collect())
    }
}
