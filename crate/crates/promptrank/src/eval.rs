//! F1@K evaluation against gold keyphrases.
//!
//! Predictions and gold phrases are compared after lowercasing,
//! whitespace collapsing, and per-word Porter stemming. Counts are
//! micro-aggregated across the corpus by default; `macro_average`
//! averages per-document metrics instead.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::porter;

pub const DEFAULT_KS: [usize; 3] = [5, 10, 15];

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub macro_average: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: DEFAULT_KS.to_vec(),
            macro_average: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrF1 {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Counts {
    pub correct: u64,
    pub predicted: u64,
    pub gold: u64,
}

/// Precision/recall/F1 per cutoff plus the raw counts behind them.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    #[serde(rename = "k")]
    pub per_k: BTreeMap<usize, PrF1>,
    pub counts: BTreeMap<usize, Counts>,
}

/// Lowercase, collapse whitespace, stem each word, rejoin with single
/// spaces.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase
        .to_lowercase()
        .split_whitespace()
        .map(porter::stem)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drop later duplicates, preserving rank order.
pub fn dedup_ranked(phrases: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    phrases
        .iter()
        .filter(|p| seen.insert(p.as_str()))
        .cloned()
        .collect()
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Evaluate ranked, normalized, deduplicated predictions against
/// normalized gold sets. `predictions[d]` and `gold[d]` describe the
/// same document.
pub fn evaluate(
    predictions: &[Vec<String>],
    gold: &[HashSet<String>],
    cfg: &EvalConfig,
) -> EvalReport {
    assert_eq!(
        predictions.len(),
        gold.len(),
        "predictions and gold must align per document"
    );
    let mut per_k = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for &k in &cfg.ks {
        let mut total = Counts::default();
        let mut macro_p = 0.0;
        let mut macro_r = 0.0;
        let mut macro_f1 = 0.0;
        for (preds, gold_set) in predictions.iter().zip(gold) {
            let top = &preds[..preds.len().min(k)];
            let correct = top.iter().filter(|p| gold_set.contains(*p)).count() as u64;
            total.correct += correct;
            total.predicted += top.len() as u64;
            total.gold += gold_set.len() as u64;
            if cfg.macro_average {
                let p = ratio(correct, top.len() as u64);
                let r = ratio(correct, gold_set.len() as u64);
                macro_p += p;
                macro_r += r;
                macro_f1 += f1(p, r);
            }
        }
        let metrics = if cfg.macro_average {
            let n = predictions.len().max(1) as f64;
            PrF1 {
                p: macro_p / n,
                r: macro_r / n,
                f1: macro_f1 / n,
            }
        } else {
            let p = ratio(total.correct, total.predicted);
            let r = ratio(total.correct, total.gold);
            PrF1 { p, r, f1: f1(p, r) }
        };
        per_k.insert(k, metrics);
        counts.insert(k, total);
    }
    EvalReport { per_k, counts }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
