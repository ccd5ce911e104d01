//! Prompt-based candidate probability.
//!
//! For each candidate the decoder text is `prefix + candidate`, with the
//! candidate strictly last, so the candidate's token span is located by
//! tokenizing the prefix alone and the prefix plus candidate. The score
//! is the length-normalized sum of the candidate-token log
//! probabilities: `p_c = l_c^{-alpha} * sum(log p(y_i | y_<i))`.

use serde::{Deserialize, Serialize};

use crate::candidates::Candidate;
use crate::templates::PromptTemplate;
use crate::{Error, Result};

pub type TokenId = u32;

pub const DEFAULT_ALPHA: f64 = 0.6;
pub const DEFAULT_ENCODER_MAX_TOKENS: usize = 512;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerConfig {
    /// Length-normalization exponent.
    pub alpha: f64,
    pub encoder_max_tokens: usize,
    pub batch_size: usize,
    pub template_id: String,
    /// Count the end-of-sequence token as part of the candidate span.
    pub include_eos: bool,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            alpha: DEFAULT_ALPHA,
            encoder_max_tokens: DEFAULT_ENCODER_MAX_TOKENS,
            batch_size: 16,
            template_id: crate::templates::DEFAULT_TEMPLATE_ID.to_string(),
            include_eos: false,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.encoder_max_tokens == 0 {
            return Err(Error::Config("encoder_max_tokens must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// An encoder-decoder model able to tokenize text and report, for every
/// decoder position, the log-softmax over the vocabulary. Start markers
/// and model conventions stay inside the implementation; decoder ids
/// passed in are content tokens only, and row `i` of the output is the
/// distribution for content token `i` given everything before it.
pub trait Backend {
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>>;

    /// Run the encoder once for a document; decoder calls afterwards
    /// reuse its states until the next `encode`.
    fn encode(&mut self, encoder_ids: &[TokenId]) -> Result<()>;

    /// Log-probability rows for a batch of decoder sequences against
    /// the current encoder states. `rows[s][i][v]` is
    /// `log p(token v at position i | sequence s tokens < i)`.
    fn decode_batch(&mut self, decoder_batch: &[Vec<TokenId>]) -> Result<Vec<Vec<Vec<f32>>>>;

    /// End-of-sequence token appended when `include_eos` is set.
    fn eos_id(&self) -> Option<TokenId> {
        None
    }
}

/// Per-candidate log-probabilities for the candidate token span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateLogProbs {
    pub token_logprobs: Vec<f64>,
    pub start_index_j: usize,
    pub candidate_token_len_lc: usize,
}

/// Candidate token span located by the two-tokenization method.
#[derive(Debug, Clone)]
pub struct LocatedCandidate {
    pub decoder_ids: Vec<TokenId>,
    pub start_index_j: usize,
    pub candidate_token_len_lc: usize,
}

/// `j` = token length of the tokenized prefix, `l_c` = tokens added by
/// the candidate. Subword tokenizers may merge across the boundary,
/// which is why both strings are tokenized in full.
pub fn locate_candidate_tokens(
    prefix: &str,
    candidate_surface: &str,
    backend: &dyn Backend,
) -> Result<LocatedCandidate> {
    if candidate_surface.is_empty() {
        return Err(Error::Input("candidate surface must be non-empty".into()));
    }
    let j = backend.tokenize(prefix)?.len();
    let decoder_ids = backend.tokenize(&format!("{prefix}{candidate_surface}"))?;
    if decoder_ids.len() < j {
        return Err(Error::backend(format!(
            "tokenizer inconsistency: prefix+candidate ({} tokens) shorter than prefix alone ({j} tokens)",
            decoder_ids.len()
        )));
    }
    Ok(LocatedCandidate {
        candidate_token_len_lc: decoder_ids.len() - j,
        start_index_j: j,
        decoder_ids,
    })
}

/// Eq. of the length-normalized log-likelihood: always <= 0.
pub fn score_candidate(logprobs: &CandidateLogProbs, cfg: &ScorerConfig) -> f64 {
    let sum: f64 = logprobs.token_logprobs.iter().sum();
    sum / (logprobs.candidate_token_len_lc as f64).powf(cfg.alpha)
}

/// Score every candidate of one document. The encoder runs once; the
/// candidates decode in batches of `cfg.batch_size`, and the result is
/// independent of that partitioning. Candidates that tokenize to
/// nothing are skipped with a warning.
pub fn score_document(
    doc_text: &str,
    candidates: &[Candidate],
    template: &PromptTemplate,
    backend: &mut dyn Backend,
    cfg: &ScorerConfig,
) -> Result<Vec<(Candidate, CandidateLogProbs, f64)>> {
    cfg.validate()?;
    let mut encoder_ids = backend.tokenize(&template.render_encoder(doc_text))?;
    encoder_ids.truncate(cfg.encoder_max_tokens);
    if encoder_ids.is_empty() {
        return Err(Error::Input("encoder input tokenized to nothing".into()));
    }

    let prefix = template.render_decoder_prefix();
    let mut located: Vec<(usize, LocatedCandidate)> = Vec::with_capacity(candidates.len());
    for (idx, candidate) in candidates.iter().enumerate() {
        let mut loc = locate_candidate_tokens(&prefix, &candidate.surface, backend)?;
        if loc.candidate_token_len_lc == 0 {
            log::warn!(
                "candidate {:?} tokenized to nothing; excluded from ranking",
                candidate.surface
            );
            continue;
        }
        if cfg.include_eos {
            if let Some(eos) = backend.eos_id() {
                loc.decoder_ids.push(eos);
                loc.candidate_token_len_lc += 1;
            }
        }
        located.push((idx, loc));
    }

    backend.encode(&encoder_ids)?;

    let mut results = Vec::with_capacity(located.len());
    for (batch_index, chunk) in located.chunks(cfg.batch_size).enumerate() {
        let batch: Vec<Vec<TokenId>> = chunk.iter().map(|(_, l)| l.decoder_ids.clone()).collect();
        let rows_batch = backend.decode_batch(&batch).map_err(|e| Error::Backend {
            message: e.to_string(),
            doc_id: None,
            batch_index: Some(batch_index),
        })?;
        if rows_batch.len() != chunk.len() {
            return Err(Error::backend(format!(
                "backend returned {} sequences for a batch of {}",
                rows_batch.len(),
                chunk.len()
            )));
        }
        for ((idx, loc), rows) in chunk.iter().zip(rows_batch) {
            if rows.len() < loc.decoder_ids.len() {
                return Err(Error::backend(format!(
                    "backend returned {} rows for {} decoder tokens",
                    rows.len(),
                    loc.decoder_ids.len()
                )));
            }
            let token_logprobs: Vec<f64> = (loc.start_index_j
                ..loc.start_index_j + loc.candidate_token_len_lc)
                .map(|i| f64::from(rows[i][loc.decoder_ids[i] as usize]))
                .collect();
            let logprobs = CandidateLogProbs {
                token_logprobs,
                start_index_j: loc.start_index_j,
                candidate_token_len_lc: loc.candidate_token_len_lc,
            };
            let p_c = score_candidate(&logprobs, cfg);
            results.push((candidates[*idx].clone(), logprobs, p_c));
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(values: &[f64]) -> CandidateLogProbs {
        CandidateLogProbs {
            token_logprobs: values.to_vec(),
            start_index_j: 0,
            candidate_token_len_lc: values.len(),
        }
    }

    fn cfg(alpha: f64) -> ScorerConfig {
        ScorerConfig {
            alpha,
            ..Default::default()
        }
    }

    #[test]
    fn single_token_normalization_is_identity() {
        assert_eq!(score_candidate(&probs(&[-2.0]), &cfg(0.6)), -2.0);
    }

    #[test]
    fn alpha_normalization_arithmetic() {
        let p = score_candidate(&probs(&[-1.0, -3.0]), &cfg(0.6));
        assert!((p - -2.6390).abs() < 1e-4, "got {p}");
        assert_eq!(score_candidate(&probs(&[-1.0, -3.0]), &cfg(1.0)), -2.0);
    }

    #[test]
    fn alpha_monotonicity() {
        let lp = probs(&[-1.0, -3.0, -0.5]);
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let p = score_candidate(&lp, &cfg(alpha));
            assert!(p > last, "p_c must increase with alpha");
            assert!(p <= 0.0);
            last = p;
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0).validate().is_err());
        assert!(cfg(-1.0).validate().is_err());
        let mut c = cfg(0.6);
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(0.6);
        c.encoder_max_tokens = 0;
        assert!(c.validate().is_err());
    }
}
