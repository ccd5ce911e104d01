//! BART adapter on candle, implemented from the standard architecture:
//! learned positional embeddings with an offset of 2, embedding
//! layer-norm, post-norm transformer layers, and an LM head tied to the
//! shared embedding. The decoder runs the full sequence in one causal
//! forward, so every position's distribution comes from a single pass.

use std::path::Path;

use candle_core::{DType, Device, IndexOp, Tensor, D};
use candle_nn::{
    embedding, layer_norm, linear, Activation, Embedding, LayerNorm, Linear, Module, VarBuilder,
};
use serde::Deserialize;

use super::t5::safetensor_files;
use super::tok::HfTokenizer;
use crate::scorer::{Backend, TokenId};
use crate::{Error, Result};

const POSITION_OFFSET: usize = 2;

fn default_activation() -> Activation {
    Activation::Gelu
}

fn default_scale_embedding() -> bool {
    false
}

#[derive(Debug, Clone, Deserialize)]
pub struct BartConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub encoder_attention_heads: usize,
    pub decoder_attention_heads: usize,
    pub encoder_ffn_dim: usize,
    pub decoder_ffn_dim: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_activation")]
    pub activation_function: Activation,
    #[serde(default = "default_scale_embedding")]
    pub scale_embedding: bool,
    pub pad_token_id: u32,
    pub eos_token_id: u32,
    pub decoder_start_token_id: Option<u32>,
}

struct Attention {
    q_proj: Linear,
    k_proj: Linear,
    v_proj: Linear,
    out_proj: Linear,
    num_heads: usize,
    head_dim: usize,
}

impl Attention {
    fn load(d_model: usize, num_heads: usize, vb: VarBuilder) -> candle_core::Result<Self> {
        Ok(Attention {
            q_proj: linear(d_model, d_model, vb.pp("q_proj"))?,
            k_proj: linear(d_model, d_model, vb.pp("k_proj"))?,
            v_proj: linear(d_model, d_model, vb.pp("v_proj"))?,
            out_proj: linear(d_model, d_model, vb.pp("out_proj"))?,
            num_heads,
            head_dim: d_model / num_heads,
        })
    }

    fn split_heads(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        let (b, t, _) = x.dims3()?;
        x.reshape((b, t, self.num_heads, self.head_dim))?
            .transpose(1, 2)?
            .contiguous()
    }

    /// `mask`, when present, is added to the attention scores before
    /// softmax.
    fn forward(
        &self,
        queries: &Tensor,
        keys_values: &Tensor,
        mask: Option<&Tensor>,
    ) -> candle_core::Result<Tensor> {
        let (b, t, d) = queries.dims3()?;
        let q = self.split_heads(&self.q_proj.forward(queries)?)?;
        let k = self.split_heads(&self.k_proj.forward(keys_values)?)?;
        let v = self.split_heads(&self.v_proj.forward(keys_values)?)?;
        let scale = (self.head_dim as f64).sqrt();
        let mut scores = (q.matmul(&k.transpose(2, 3)?)? / scale)?;
        if let Some(mask) = mask {
            scores = scores.broadcast_add(mask)?;
        }
        let weights = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let context = weights
            .matmul(&v)?
            .transpose(1, 2)?
            .reshape((b, t, d))?;
        self.out_proj.forward(&context)
    }
}

struct FeedForward {
    fc1: Linear,
    fc2: Linear,
    activation: Activation,
}

impl FeedForward {
    fn load(
        d_model: usize,
        ffn_dim: usize,
        activation: Activation,
        vb: VarBuilder,
    ) -> candle_core::Result<Self> {
        Ok(FeedForward {
            fc1: linear(d_model, ffn_dim, vb.pp("fc1"))?,
            fc2: linear(ffn_dim, d_model, vb.pp("fc2"))?,
            activation,
        })
    }

    fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        self.fc2
            .forward(&self.activation.forward(&self.fc1.forward(x)?)?)
    }
}

struct EncoderLayer {
    self_attn: Attention,
    self_attn_layer_norm: LayerNorm,
    ffn: FeedForward,
    final_layer_norm: LayerNorm,
}

impl EncoderLayer {
    fn load(cfg: &BartConfig, vb: VarBuilder) -> candle_core::Result<Self> {
        Ok(EncoderLayer {
            self_attn: Attention::load(cfg.d_model, cfg.encoder_attention_heads, vb.pp("self_attn"))?,
            self_attn_layer_norm: layer_norm(cfg.d_model, 1e-5, vb.pp("self_attn_layer_norm"))?,
            ffn: FeedForward::load(
                cfg.d_model,
                cfg.encoder_ffn_dim,
                cfg.activation_function,
                vb.clone(),
            )?,
            final_layer_norm: layer_norm(cfg.d_model, 1e-5, vb.pp("final_layer_norm"))?,
        })
    }

    fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        let attn = self.self_attn.forward(x, x, None)?;
        let x = self.self_attn_layer_norm.forward(&(x + attn)?)?;
        let ffn = self.ffn.forward(&x)?;
        self.final_layer_norm.forward(&(x + ffn)?)
    }
}

struct DecoderLayer {
    self_attn: Attention,
    self_attn_layer_norm: LayerNorm,
    encoder_attn: Attention,
    encoder_attn_layer_norm: LayerNorm,
    ffn: FeedForward,
    final_layer_norm: LayerNorm,
}

impl DecoderLayer {
    fn load(cfg: &BartConfig, vb: VarBuilder) -> candle_core::Result<Self> {
        Ok(DecoderLayer {
            self_attn: Attention::load(cfg.d_model, cfg.decoder_attention_heads, vb.pp("self_attn"))?,
            self_attn_layer_norm: layer_norm(cfg.d_model, 1e-5, vb.pp("self_attn_layer_norm"))?,
            encoder_attn: Attention::load(
                cfg.d_model,
                cfg.decoder_attention_heads,
                vb.pp("encoder_attn"),
            )?,
            encoder_attn_layer_norm: layer_norm(cfg.d_model, 1e-5, vb.pp("encoder_attn_layer_norm"))?,
            ffn: FeedForward::load(
                cfg.d_model,
                cfg.decoder_ffn_dim,
                cfg.activation_function,
                vb.clone(),
            )?,
            final_layer_norm: layer_norm(cfg.d_model, 1e-5, vb.pp("final_layer_norm"))?,
        })
    }

    fn forward(
        &self,
        x: &Tensor,
        encoder_states: &Tensor,
        causal_mask: &Tensor,
    ) -> candle_core::Result<Tensor> {
        let attn = self.self_attn.forward(x, x, Some(causal_mask))?;
        let x = self.self_attn_layer_norm.forward(&(x + attn)?)?;
        let cross = self.encoder_attn.forward(&x, encoder_states, None)?;
        let x = self.encoder_attn_layer_norm.forward(&(&x + cross)?)?;
        let ffn = self.ffn.forward(&x)?;
        self.final_layer_norm.forward(&(x + ffn)?)
    }
}

struct Embeddings {
    tokens: Embedding,
    positions: Embedding,
    layernorm: LayerNorm,
    scale: f64,
}

impl Embeddings {
    fn load(cfg: &BartConfig, shared: Embedding, vb: VarBuilder) -> candle_core::Result<Self> {
        Ok(Embeddings {
            tokens: shared,
            positions: embedding(
                cfg.max_position_embeddings + POSITION_OFFSET,
                cfg.d_model,
                vb.pp("embed_positions"),
            )?,
            layernorm: layer_norm(cfg.d_model, 1e-5, vb.pp("layernorm_embedding"))?,
            scale: if cfg.scale_embedding {
                (cfg.d_model as f64).sqrt()
            } else {
                1.0
            },
        })
    }

    fn forward(&self, ids: &Tensor, device: &Device) -> candle_core::Result<Tensor> {
        let t = ids.dim(1)?;
        let pos: Vec<u32> = (0..t).map(|p| (p + POSITION_OFFSET) as u32).collect();
        let pos = Tensor::new(pos.as_slice(), device)?.unsqueeze(0)?;
        let x = ((self.tokens.forward(ids)? * self.scale)?
            + self.positions.forward(&pos)?)?;
        self.layernorm.forward(&x)
    }
}

pub struct BartModel {
    encoder_embed: Embeddings,
    encoder_layers: Vec<EncoderLayer>,
    decoder_embed: Embeddings,
    decoder_layers: Vec<DecoderLayer>,
    lm_head: Tensor,
    final_logits_bias: Option<Tensor>,
    device: Device,
}

impl BartModel {
    pub fn load(cfg: &BartConfig, vb: VarBuilder) -> candle_core::Result<Self> {
        let model = vb.pp("model");
        let shared = embedding(cfg.vocab_size, cfg.d_model, model.pp("shared"))?;
        let encoder_embed = Embeddings::load(cfg, shared.clone(), model.pp("encoder"))?;
        let decoder_embed = Embeddings::load(cfg, shared.clone(), model.pp("decoder"))?;
        let mut encoder_layers = Vec::with_capacity(cfg.encoder_layers);
        for i in 0..cfg.encoder_layers {
            encoder_layers.push(EncoderLayer::load(cfg, model.pp(format!("encoder.layers.{i}")))?);
        }
        let mut decoder_layers = Vec::with_capacity(cfg.decoder_layers);
        for i in 0..cfg.decoder_layers {
            decoder_layers.push(DecoderLayer::load(cfg, model.pp(format!("decoder.layers.{i}")))?);
        }
        let final_logits_bias = vb
            .get((1, cfg.vocab_size), "final_logits_bias")
            .ok();
        Ok(BartModel {
            encoder_embed,
            encoder_layers,
            decoder_embed,
            decoder_layers,
            // tied to the shared token embedding
            lm_head: shared.embeddings().clone(),
            final_logits_bias,
            device: vb.device().clone(),
        })
    }

    pub fn encode(&self, ids: &Tensor) -> candle_core::Result<Tensor> {
        let mut x = self.encoder_embed.forward(ids, &self.device)?;
        for layer in &self.encoder_layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    fn causal_mask(&self, t: usize) -> candle_core::Result<Tensor> {
        let mut data = vec![0f32; t * t];
        for i in 0..t {
            for j in (i + 1)..t {
                data[i * t + j] = f32::NEG_INFINITY;
            }
        }
        Tensor::from_vec(data, (1, 1, t, t), &self.device)
    }

    /// Logits for every position of the teacher-forced decoder input.
    pub fn decode(&self, ids: &Tensor, encoder_states: &Tensor) -> candle_core::Result<Tensor> {
        let mut x = self.decoder_embed.forward(ids, &self.device)?;
        let mask = self.causal_mask(ids.dim(1)?)?;
        for layer in &self.decoder_layers {
            x = layer.forward(&x, encoder_states, &mask)?;
        }
        let mut logits = x.broadcast_matmul(&self.lm_head.t()?)?;
        if let Some(bias) = &self.final_logits_bias {
            logits = logits.broadcast_add(&bias.unsqueeze(0)?)?;
        }
        Ok(logits)
    }
}

/// Log-softmax rows for one decoder sequence in a single causal
/// forward. Row `i` covers content token `i` given the start token and
/// tokens before it.
pub(super) fn sequence_rows(
    model: &BartModel,
    encoder_states: &Tensor,
    ids: &[TokenId],
    start_token: u32,
    device: &Device,
) -> Result<Vec<Vec<f32>>> {
    let run = |e: candle_core::Error| Error::backend(format!("bart decode failed: {e}"));
    let mut input = Vec::with_capacity(ids.len());
    input.push(start_token);
    input.extend_from_slice(&ids[..ids.len() - 1]);
    let input_t = Tensor::new(input.as_slice(), device)
        .and_then(|t| t.unsqueeze(0))
        .map_err(run)?;
    let logits = model.decode(&input_t, encoder_states).map_err(run)?;
    let rows = candle_nn::ops::log_softmax(&logits, D::Minus1)
        .and_then(|t| t.squeeze(0))
        .map_err(run)?;
    (0..ids.len())
        .map(|i| rows.i(i).and_then(|r| r.to_vec1::<f32>()).map_err(run))
        .collect()
}

pub struct BartBackend {
    tokenizer: HfTokenizer,
    model: BartModel,
    device: Device,
    start_token: u32,
    eos_token: u32,
    encoder_states: Option<Tensor>,
}

impl BartBackend {
    pub fn load(dir: &Path) -> Result<Self> {
        let config_path = dir.join("config.json");
        let config_text =
            std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let config: BartConfig = serde_json::from_str(&config_text)
            .map_err(|e| Error::backend(format!("bad config.json: {e}")))?;
        let tokenizer = HfTokenizer::load(dir)?;
        let device = Device::Cpu;
        let vb = unsafe {
            VarBuilder::from_mmaped_safetensors(&safetensor_files(dir)?, DType::F32, &device)
        }
        .map_err(|e| Error::backend(format!("cannot load weights: {e}")))?;
        let model = BartModel::load(&config, vb)
            .map_err(|e| Error::backend(format!("cannot build model: {e}")))?;
        Ok(BartBackend {
            tokenizer,
            model,
            device,
            start_token: config.decoder_start_token_id.unwrap_or(config.eos_token_id),
            eos_token: config.eos_token_id,
            encoder_states: None,
        })
    }
}

impl Backend for BartBackend {
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        self.tokenizer.encode(text)
    }

    fn encode(&mut self, encoder_ids: &[TokenId]) -> Result<()> {
        let run = |e: candle_core::Error| Error::backend(format!("bart encode failed: {e}"));
        let input = Tensor::new(encoder_ids, &self.device)
            .and_then(|t| t.unsqueeze(0))
            .map_err(run)?;
        self.encoder_states = Some(self.model.encode(&input).map_err(run)?);
        Ok(())
    }

    fn decode_batch(&mut self, decoder_batch: &[Vec<TokenId>]) -> Result<Vec<Vec<Vec<f32>>>> {
        let encoder_states = self
            .encoder_states
            .clone()
            .ok_or_else(|| Error::backend("decode_batch called before encode"))?;
        decoder_batch
            .iter()
            .map(|ids| {
                if ids.is_empty() {
                    return Err(Error::backend("empty decoder sequence"));
                }
                sequence_rows(&self.model, &encoder_states, ids, self.start_token, &self.device)
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

    fn tiny_model() -> (BartModel, BartConfig, Device) {
        let config: BartConfig = serde_json::from_str(
            r#"{
                "vocab_size": 48,
                "d_model": 16,
                "encoder_layers": 2,
                "decoder_layers": 2,
                "encoder_attention_heads": 2,
                "decoder_attention_heads": 2,
                "encoder_ffn_dim": 32,
                "decoder_ffn_dim": 32,
                "max_position_embeddings": 64,
                "activation_function": "gelu",
                "pad_token_id": 1,
                "eos_token_id": 2,
                "decoder_start_token_id": 2
            }"#,
        )
        .unwrap();
        let device = Device::Cpu;
        let vb = VarBuilder::zeros(DType::F32, &device);
        let model = BartModel::load(&config, vb).unwrap();
        (model, config, device)
    }

    #[test]
    fn zero_weight_rows_are_normalized_log_distributions() {
        let (model, config, device) = tiny_model();
        let enc = Tensor::new(&[3u32, 4, 5], &device)
            .unwrap()
            .unsqueeze(0)
            .unwrap();
        let states = model.encode(&enc).unwrap();
        let rows = sequence_rows(&model, &states, &[6, 7, 8, 9], 2, &device).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert_eq!(row.len(), config.vocab_size);
            let total: f64 = row.iter().map(|lp| f64::from(*lp).exp()).sum();
            assert!((total - 1.0).abs() < 1e-4, "got {total}");
        }
    }

    #[test]
    fn full_sequence_matches_growing_prefixes() {
        // the causal mask must make row i independent of tokens after i
        let (model, _, device) = tiny_model();
        let enc = Tensor::new(&[3u32, 4], &device)
            .unwrap()
            .unsqueeze(0)
            .unwrap();
        let states = model.encode(&enc).unwrap();
        let ids = [6u32, 7, 8];
        let full = sequence_rows(&model, &states, &ids, 2, &device).unwrap();
        for n in 1..=ids.len() {
            let prefix = sequence_rows(&model, &states, &ids[..n], 2, &device).unwrap();
            for (a, b) in prefix.iter().zip(&full) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-5);
                }
            }
        }
    }
}
