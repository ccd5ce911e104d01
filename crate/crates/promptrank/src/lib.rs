//! Prompt-based unsupervised keyphrase extraction.
//!
//! The pipeline runs in four steps: noun-phrase candidates are extracted
//! from a POS-tagged document, each candidate is scored by the probability
//! an encoder-decoder language model assigns to a prompt ending in that
//! candidate, a document-length-aware position penalty is applied, and the
//! candidates are ranked by the combined score.
//!
//! ```
//! use promptrank::backend::StubBackend;
//! use promptrank::pipeline::{extract_keyphrases, PipelineConfig};
//!
//! let cfg = PipelineConfig::default();
//! let tagger = promptrank::tagger::PerceptronTagger::builtin().unwrap();
//! let mut backend = StubBackend::new(42);
//! let ranked = extract_keyphrases(
//!     "Efficient keyphrase extraction works well.",
//!     &tagger,
//!     &mut backend,
//!     &cfg,
//! )
//! .unwrap();
//! assert!(!ranked.is_empty());
//! ```

pub mod backend;
pub mod candidates;
pub mod corpus;
pub mod eval;
pub mod pipeline;
pub mod porter;
pub mod preprocess;
pub mod ranker;
pub mod scorer;
pub mod tagger;
pub mod templates;

use std::path::PathBuf;

/// Errors surfaced by the library. CLI exit codes map `Input`/`Usage`
/// style errors to 2 and backend failures to 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed corpus line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate document id {id:?}")]
    DuplicateId { id: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid template {id:?}: {message}")]
    Template { id: String, message: String },
    #[error("unknown template id {0:?}")]
    UnknownTemplate(String),
    #[error("tagger weights error: {0}")]
    TaggerWeights(String),
    #[error("backend error{}: {message}", doc_context(.doc_id, .batch_index))]
    Backend {
        message: String,
        doc_id: Option<String>,
        batch_index: Option<usize>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn doc_context(doc_id: &Option<String>, batch_index: &Option<usize>) -> String {
    match (doc_id, batch_index) {
        (Some(d), Some(b)) => format!(" (doc {d}, batch {b})"),
        (Some(d), None) => format!(" (doc {d})"),
        (None, Some(b)) => format!(" (batch {b})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn backend(message: impl Into<String>) -> Self {
        Error::Backend {
            message: message.into(),
            doc_id: None,
            batch_index: None,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
