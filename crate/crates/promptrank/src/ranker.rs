//! Position penalty and final ranking.
//!
//! The penalty `r_c = pos/len + beta` with `beta = gamma / len^3`
//! multiplies the negative prompt probability, so late-occurring
//! candidates in long documents are pushed down while short documents
//! get a large beta that nearly switches position off.

use serde::{Deserialize, Serialize};

use crate::candidates::{clamp_position, Candidate};
use crate::preprocess::TaggedDocument;

pub const DEFAULT_GAMMA: f64 = 1.2e8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankerConfig {
    pub gamma: f64,
    pub use_position: bool,
    pub top_k: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            gamma: DEFAULT_GAMMA,
            use_position: true,
            top_k: 10,
        }
    }
}

/// A candidate with its probability, penalty, final score, and rank.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub p_c: f64,
    pub r_c: f64,
    pub s_c: f64,
    /// 1-based rank; ranks form a permutation of 1..=n.
    pub rank: usize,
    /// Whether this entry is inside the top-k prediction prefix.
    pub predicted: bool,
}

/// Position-information damping term, cubic in document length.
pub fn beta(len_effective: usize, gamma: f64) -> f64 {
    let len = len_effective as f64;
    gamma / (len * len * len)
}

/// `r_c = pos/len + beta`.
pub fn position_penalty(pos: usize, len_effective: usize, beta: f64) -> f64 {
    pos as f64 / len_effective as f64 + beta
}

/// `s_c = r_c * p_c`.
pub fn final_score(p_c: f64, r_c: f64) -> f64 {
    r_c * p_c
}

/// Rank candidates by final score descending. Ties break by earlier
/// first position, then lexicographic normalized form.
pub fn rank(
    scored: Vec<(Candidate, f64)>,
    doc: &TaggedDocument,
    cfg: &RankerConfig,
) -> Vec<ScoredCandidate> {
    let b = beta(doc.len_effective.max(1), cfg.gamma);
    let mut out: Vec<ScoredCandidate> = scored
        .into_iter()
        .map(|(candidate, p_c)| {
            let r_c = if cfg.use_position {
                position_penalty(clamp_position(&candidate, doc), doc.len_effective.max(1), b)
            } else {
                1.0
            };
            let s_c = final_score(p_c, r_c);
            ScoredCandidate {
                candidate,
                p_c,
                r_c,
                s_c,
                rank: 0,
                predicted: false,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.s_c
            .partial_cmp(&a.s_c)
            .unwrap()
            .then_with(|| a.candidate.first_pos.cmp(&b.candidate.first_pos))
            .then_with(|| a.candidate.normalized.cmp(&b.candidate.normalized))
    });
    for (i, sc) in out.iter_mut().enumerate() {
        sc.rank = i + 1;
        sc.predicted = i < cfg.top_k;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::TaggedDocument;

    fn cand(surface: &str, pos: usize) -> Candidate {
        Candidate {
            surface: surface.to_string(),
            normalized: surface.to_lowercase(),
            first_pos: pos,
            word_len: surface.split(' ').count(),
        }
    }

    fn doc_of_len(n: usize) -> TaggedDocument {
        TaggedDocument::new(
            (0..n).map(|i| format!("w{i}")).collect(),
            vec!["NN".to_string(); n],
            512,
        )
        .unwrap()
    }

    #[test]
    fn beta_reproduces_reference_values() {
        assert!((beta(122, DEFAULT_GAMMA) - 66.08).abs() < 0.01);
        assert!((beta(190, DEFAULT_GAMMA) - 17.50).abs() < 0.01);
        assert!((beta(170, DEFAULT_GAMMA) - 24.42).abs() < 0.01);
        assert!((beta(512, DEFAULT_GAMMA) - 0.894).abs() < 0.005);
    }

    #[test]
    fn penalty_arithmetic() {
        let b = beta(122, DEFAULT_GAMMA);
        assert_eq!(position_penalty(0, 122, b), b);
        assert!((position_penalty(61, 122, b) - 66.58).abs() < 0.01);
        assert!((position_penalty(511, 512, 0.894) - 1.8921).abs() < 1e-3);
    }

    #[test]
    fn final_score_is_product() {
        assert_eq!(final_score(-2.0, 1.0), -2.0);
        assert_eq!(final_score(-2.0, 1.5), -3.0);
        assert_eq!(final_score(0.0, 123.0), 0.0);
    }

    #[test]
    fn earlier_candidate_wins_at_equal_probability() {
        let doc = doc_of_len(122);
        let ranked = rank(
            vec![(cand("b", 61), -2.0), (cand("a", 0), -2.0)],
            &doc,
            &RankerConfig::default(),
        );
        assert_eq!(ranked[0].candidate.surface, "a");
        assert!((ranked[0].s_c - -132.17).abs() < 0.02);
        assert!((ranked[1].s_c - -133.17).abs() < 0.02);
        assert_eq!(ranked[0].rank, 1);
        assert_eq!(ranked[1].rank, 2);
    }

    #[test]
    fn position_off_means_unit_penalty() {
        let doc = doc_of_len(122);
        let cfg = RankerConfig {
            use_position: false,
            ..Default::default()
        };
        let ranked = rank(
            vec![(cand("late", 100), -1.0), (cand("early", 0), -2.0)],
            &doc,
            &cfg,
        );
        assert_eq!(ranked[0].candidate.surface, "late");
        assert_eq!(ranked[0].r_c, 1.0);
        assert_eq!(ranked[1].r_c, 1.0);
    }

    #[test]
    fn single_candidate_ranks_first() {
        let doc = doc_of_len(10);
        let ranked = rank(vec![(cand("only", 0), -1.0)], &doc, &RankerConfig::default());
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].rank, 1);
        assert!(ranked[0].predicted);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let doc = doc_of_len(10);
        assert!(rank(vec![], &doc, &RankerConfig::default()).is_empty());
    }

    #[test]
    fn beta_halving_law() {
        for len in [10usize, 50, 100, 256] {
            let a = beta(len, DEFAULT_GAMMA);
            let b2 = beta(2 * len, DEFAULT_GAMMA);
            assert!((b2 - a / 8.0).abs() < 1e-9 * a.max(1.0));
        }
    }
}
