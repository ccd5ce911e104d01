//! Word tokenization and POS tagging front end.
//!
//! Produces the [`TaggedDocument`] the chunker consumes. The tagger is
//! pluggable behind [`PosTagger`]; a pre-tagged bypass reads
//! `token<TAB>tag` lines so the pipeline can be validated against
//! external taggers.

use std::io::BufRead;
use std::path::Path;

use crate::{Error, Result};

/// Word-level length cap mirroring the encoder input truncation.
pub const DEFAULT_POSITION_CAP: usize = 512;

/// A document after tokenization and POS tagging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedDocument {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub len_effective: usize,
}

impl TaggedDocument {
    /// Pair parallel token/tag arrays, applying the position cap.
    pub fn new(tokens: Vec<String>, tags: Vec<String>, cap: usize) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Input(format!(
                "token/tag length mismatch: {} vs {}",
                tokens.len(),
                tags.len()
            )));
        }
        if let Some(bad) = tags.iter().find(|t| {
            t.is_empty() || !t.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        }) {
            return Err(Error::Input(format!("invalid POS tag {bad:?}")));
        }
        let len_effective = tokens.len().min(cap).max(usize::from(tokens.is_empty()));
        Ok(TaggedDocument {
            tokens,
            tags,
            len_effective,
        })
    }
}

/// A POS tagger: one Penn-Treebank-style tag per token.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Result<Vec<String>>;
}

/// Deterministic word-level tokenizer. Punctuation is split off word
/// edges; interior hyphens and apostrophes are kept, so hyphenated
/// words stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut tokens);
    }
    tokens
}

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '—' | '–' | '…')
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut start = 0;
    let mut end = chars.len();
    while start < end && is_edge_punct(chars[start]) {
        start += 1;
    }
    while end > start && is_edge_punct(chars[end - 1]) {
        end -= 1;
    }
    for c in &chars[..start] {
        out.push(c.to_string());
    }
    if start < end {
        out.push(chars[start..end].iter().collect());
    }
    for c in &chars[end..] {
        out.push(c.to_string());
    }
}

/// Tokenize and tag raw text into a capped [`TaggedDocument`].
pub fn preprocess(text: &str, tagger: &dyn PosTagger, cap: usize) -> Result<TaggedDocument> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return TaggedDocument::new(Vec::new(), Vec::new(), cap);
    }
    let tags = tagger.tag(&tokens)?;
    TaggedDocument::new(tokens, tags, cap)
}

/// Read pre-tagged documents: one `token<TAB>tag` per line, blank line
/// between documents.
pub fn load_pretagged(path: &Path, cap: usize) -> Result<Vec<TaggedDocument>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                docs.push(TaggedDocument::new(
                    std::mem::take(&mut tokens),
                    std::mem::take(&mut tags),
                    cap,
                )?);
            }
            continue;
        }
        let (token, tag) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
            line: lineno + 1,
            message: format!("expected token<TAB>tag, got {line:?}"),
        })?;
        tokens.push(token.to_string());
        // Treebank punctuation tags (".", ",", "``", ...) violate the
        // uppercase-initial tag invariant; fold them into SYM.
        let tag = if tag.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            tag.to_string()
        } else {
            "SYM".to_string()
        };
        tags.push(tag);
    }
    if !tokens.is_empty() {
        docs.push(TaggedDocument::new(tokens, tags, cap)?);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_trailing_punctuation() {
        assert_eq!(
            tokenize("Deep learning works."),
            vec!["Deep", "learning", "works", "."]
        );
    }

    #[test]
    fn whitespace_only_is_empty() {
        assert_eq!(tokenize("   \t\n "), Vec::<String>::new());
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn hyphenated_words_kept_whole() {
        assert_eq!(tokenize("state-of-the-art"), vec!["state-of-the-art"]);
        assert_eq!(
            tokenize("a state-of-the-art method,"),
            vec!["a", "state-of-the-art", "method", ","]
        );
    }

    #[test]
    fn leading_and_paired_punctuation() {
        assert_eq!(
            tokenize("(see \"results\")"),
            vec!["(", "see", "\"", "results", "\"", ")"]
        );
    }

    #[test]
    fn cap_applies_to_len_effective() {
        let tokens: Vec<String> = (0..600).map(|i| format!("w{i}")).collect();
        let tags = vec!["NN".to_string(); 600];
        let doc = TaggedDocument::new(tokens, tags, DEFAULT_POSITION_CAP).unwrap();
        assert_eq!(doc.len_effective, 512);
    }

    #[test]
    fn mismatched_arrays_rejected() {
        let err = TaggedDocument::new(vec!["a".into()], vec![], 512);
        assert!(err.is_err());
    }

    #[test]
    fn pretagged_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tagged.tsv");
        std::fs::write(&path, "Deep\tJJ\nlearning\tNN\n\nthe\tDT\ncat\tNN\n").unwrap();
        let docs = load_pretagged(&path, 512).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].tokens, vec!["Deep", "learning"]);
        assert_eq!(docs[0].tags, vec!["JJ", "NN"]);
        assert_eq!(docs[1].len_effective, 2);
    }

    #[test]
    fn pretagged_malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "Deep\tJJ\nnotab\n").unwrap();
        match load_pretagged(&path, 512) {
            Err(crate::Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other:?}"),
        }
    }
}
