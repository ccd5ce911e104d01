//! Noun-phrase candidate extraction.
//!
//! Candidates are maximal tag runs matching `(NN.*|JJ)* NN.*`: the
//! longest contiguous run of adjectives and nouns that ends in a noun.
//! Duplicates by lowercased surface form collapse to the earliest
//! occurrence.

use std::collections::HashMap;

use serde::Serialize;

use crate::preprocess::TaggedDocument;

/// A noun-phrase candidate with its first-occurrence position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    /// Space-joined original tokens of the first occurrence.
    pub surface: String,
    /// Lowercased surface, the dedup and evaluation key.
    pub normalized: String,
    /// Word index of the first token of the first occurrence, 0-based.
    pub first_pos: usize,
    pub word_len: usize,
}

fn is_noun(tag: &str) -> bool {
    tag.starts_with("NN")
}

fn is_np_part(tag: &str) -> bool {
    is_noun(tag) || tag == "JJ"
}

/// Extract candidates as greedy-maximal adjective/noun runs ending in a
/// noun, deduplicated case-insensitively, ordered by first position.
pub fn extract_candidates(doc: &TaggedDocument) -> Vec<Candidate> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<Candidate> = Vec::new();
    let n = doc.tags.len();
    let mut i = 0;
    while i < n {
        if !is_np_part(&doc.tags[i]) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && is_np_part(&doc.tags[i]) {
            i += 1;
        }
        // trim trailing adjectives so the run ends in a noun
        let mut end = i;
        while end > run_start && !is_noun(&doc.tags[end - 1]) {
            end -= 1;
        }
        if end == run_start {
            continue;
        }
        let surface = doc.tokens[run_start..end].join(" ");
        let normalized = surface.to_lowercase();
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(normalized.clone()) {
            e.insert(out.len());
            out.push(Candidate {
                surface,
                normalized,
                first_pos: run_start,
                word_len: end - run_start,
            });
        }
    }
    out
}

/// Position clamped into the capped document length, so truncated
/// documents still give every candidate a valid position.
pub fn clamp_position(candidate: &Candidate, doc: &TaggedDocument) -> usize {
    candidate.first_pos.min(doc.len_effective.saturating_sub(1))
}
