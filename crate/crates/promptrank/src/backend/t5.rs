//! T5 adapter on candle.
//!
//! The encoder runs once per document; decoding is stepwise with the
//! KV cache, collecting the log-softmax row for every decoder position.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::VarBuilder;
use candle_transformers::models::t5::{Config, T5ForConditionalGeneration};

use super::tok::HfTokenizer;
use crate::scorer::{Backend, TokenId};
use crate::{Error, Result};

pub struct T5Backend {
    tokenizer: HfTokenizer,
    model: T5ForConditionalGeneration,
    device: Device,
    start_token: u32,
    eos_token: u32,
    encoder_output: Option<Tensor>,
}

/// All `.safetensors` files in the directory, sorted for stable shard
/// order.
pub(super) fn safetensor_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "safetensors"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::backend(format!(
            "no .safetensors weights in {}",
            dir.display()
        )));
    }
    Ok(files)
}

impl T5Backend {
    /// Load `config.json`, `tokenizer.json`, and safetensors weights
    /// from a model directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let config_path = dir.join("config.json");
        let config_text =
            std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let config: Config = serde_json::from_str(&config_text)
            .map_err(|e| Error::backend(format!("bad config.json: {e}")))?;
        let tokenizer = HfTokenizer::load(dir)?;
        let device = Device::Cpu;
        let vb = unsafe {
            VarBuilder::from_mmaped_safetensors(&safetensor_files(dir)?, DType::F32, &device)
        }
        .map_err(|e| Error::backend(format!("cannot load weights: {e}")))?;
        let model = T5ForConditionalGeneration::load(vb, &config)
            .map_err(|e| Error::backend(format!("cannot build model: {e}")))?;
        Ok(T5Backend {
            tokenizer,
            model,
            device,
            start_token: config.decoder_start_token_id.unwrap_or(config.pad_token_id) as u32,
            eos_token: config.eos_token_id as u32,
            encoder_output: None,
        })
    }
}

/// Log-softmax rows for one decoder sequence: row `i` is the
/// distribution over content token `i` given the start token and
/// content tokens before it.
pub(super) fn sequence_rows(
    model: &mut T5ForConditionalGeneration,
    encoder_output: &Tensor,
    ids: &[TokenId],
    start_token: u32,
    device: &Device,
) -> Result<Vec<Vec<f32>>> {
    let run = |e: candle_core::Error| Error::backend(format!("t5 decode failed: {e}"));
    model.clear_kv_cache();
    let mut rows = Vec::with_capacity(ids.len());
    let mut input = start_token;
    for &next in ids {
        let input_t = Tensor::new(&[input], device)
            .and_then(|t| t.unsqueeze(0))
            .map_err(run)?;
        let logits = model.decode(&input_t, encoder_output).map_err(run)?;
        let row = candle_nn::ops::log_softmax(&logits, 1)
            .and_then(|t| t.squeeze(0))
            .and_then(|t| t.to_vec1::<f32>())
            .map_err(run)?;
        rows.push(row);
        input = next;
    }
    Ok(rows)
}

impl Backend for T5Backend {
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        self.tokenizer.encode(text)
    }

    fn encode(&mut self, encoder_ids: &[TokenId]) -> Result<()> {
        let run = |e: candle_core::Error| Error::backend(format!("t5 encode failed: {e}"));
        self.model.clear_kv_cache();
        let input = Tensor::new(encoder_ids, &self.device)
            .and_then(|t| t.unsqueeze(0))
            .map_err(run)?;
        self.encoder_output = Some(self.model.encode(&input).map_err(run)?);
        Ok(())
    }

    fn decode_batch(&mut self, decoder_batch: &[Vec<TokenId>]) -> Result<Vec<Vec<Vec<f32>>>> {
        let encoder_output = self
            .encoder_output
            .clone()
            .ok_or_else(|| Error::backend("decode_batch called before encode"))?;
        decoder_batch
            .iter()
            .map(|ids| {
                sequence_rows(
                    &mut self.model,
                    &encoder_output,
                    ids,
                    self.start_token,
                    &self.device,
                )
            })
            .collect()
    }

    fn eos_id(&self) -> Option<TokenId> {
        Some(self.eos_token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> (T5ForConditionalGeneration, Config, Device) {
        let config: Config = serde_json::from_str(
            r#"{
                "vocab_size": 32,
                "d_model": 16,
                "d_kv": 4,
                "d_ff": 32,
                "num_layers": 2,
                "num_heads": 2,
                "relative_attention_num_buckets": 8,
                "dropout_rate": 0.0,
                "layer_norm_epsilon": 1e-6,
                "initializer_factor": 1.0,
                "feed_forward_proj": "relu",
                "is_encoder_decoder": true,
                "pad_token_id": 0,
                "eos_token_id": 1,
                "decoder_start_token_id": 0
            }"#,
        )
        .unwrap();
        let device = Device::Cpu;
        let vb = VarBuilder::zeros(DType::F32, &device);
        let model = T5ForConditionalGeneration::load(vb, &config).unwrap();
        (model, config, device)
    }

    #[test]
    fn zero_weight_rows_are_normalized_log_distributions() {
        let (mut model, config, device) = tiny_model();
        let enc_ids = Tensor::new(&[2u32, 3, 4], &device)
            .unwrap()
            .unsqueeze(0)
            .unwrap();
        let encoder_output = model.encode(&enc_ids).unwrap();
        let rows = sequence_rows(&mut model, &encoder_output, &[5, 6, 7], 0, &device).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.len(), config.vocab_size);
            let total: f64 = row.iter().map(|lp| f64::from(*lp).exp()).sum();
            assert!((total - 1.0).abs() < 1e-4, "got {total}");
        }
        // zero weights give a uniform distribution
        let uniform = -(config.vocab_size as f32).ln();
        for lp in &rows[0] {
            assert!((lp - uniform).abs() < 1e-4);
        }
    }

    #[test]
    fn sequences_are_cache_isolated() {
        let (mut model, _, device) = tiny_model();
        let enc_ids = Tensor::new(&[2u32, 3], &device)
            .unwrap()
            .unsqueeze(0)
            .unwrap();
        let encoder_output = model.encode(&enc_ids).unwrap();
        let a1 = sequence_rows(&mut model, &encoder_output, &[5, 9], 0, &device).unwrap();
        let _b = sequence_rows(&mut model, &encoder_output, &[8, 8, 8, 8], 0, &device).unwrap();
        let a2 = sequence_rows(&mut model, &encoder_output, &[5, 9], 0, &device).unwrap();
        assert_eq!(a1, a2);
    }
}
