//! Averaged-perceptron POS tagger.
//!
//! Inference loads serialized weights from a versioned JSON file; the
//! `train-tagger` binary produces that file from `token<TAB>tag`
//! training data. Weights shipped in `data/tagger-weights.json` are
//! embedded as the builtin model.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::preprocess::PosTagger;
use crate::{Error, Result};

const FORMAT_TAG: &str = "promptrank-tagger";
const FORMAT_VERSION: u32 = 1;

/// Serialized tagger model. `weights` maps feature → tag → weight;
/// `tagdict` holds unambiguous frequent words.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaggerModel {
    pub format: String,
    pub version: u32,
    pub classes: Vec<String>,
    pub tagdict: BTreeMap<String, String>,
    pub weights: BTreeMap<String, BTreeMap<String, f64>>,
}

/// POS tagger with perceptron weights, a lexicon shortcut, and hard
/// rules for numbers and punctuation.
#[derive(Debug, Clone)]
pub struct PerceptronTagger {
    model: TaggerModel,
}

impl PerceptronTagger {
    pub fn from_model(model: TaggerModel) -> Result<Self> {
        if model.format != FORMAT_TAG {
            return Err(Error::TaggerWeights(format!(
                "unexpected format marker {:?}",
                model.format
            )));
        }
        if model.version != FORMAT_VERSION {
            return Err(Error::TaggerWeights(format!(
                "unsupported weights version {}",
                model.version
            )));
        }
        if model.classes.is_empty() {
            return Err(Error::TaggerWeights("empty tag set".into()));
        }
        Ok(PerceptronTagger { model })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TaggerModel = serde_json::from_str(&data)
            .map_err(|e| Error::TaggerWeights(format!("{}: {e}", path.display())))?;
        Self::from_model(model)
    }

    /// Tagger backed by the weights shipped with the crate.
    pub fn builtin() -> Result<Self> {
        let model: TaggerModel =
            serde_json::from_str(include_str!("../data/tagger-weights.json"))
                .map_err(|e| Error::TaggerWeights(format!("builtin weights: {e}")))?;
        Self::from_model(model)
    }

    pub fn model(&self) -> &TaggerModel {
        &self.model
    }

    fn predict(&self, features: &[String]) -> String {
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for feat in features {
            if let Some(tag_weights) = self.model.weights.get(feat) {
                for (tag, w) in tag_weights {
                    *scores.entry(tag).or_insert(0.0) += w;
                }
            }
        }
        // Argmax with lexicographic tie-break for determinism.
        self.model
            .classes
            .iter()
            .max_by(|a, b| {
                let sa = scores.get(a.as_str()).copied().unwrap_or(0.0);
                let sb = scores.get(b.as_str()).copied().unwrap_or(0.0);
                sa.partial_cmp(&sb)
                    .unwrap()
                    .then_with(|| b.as_str().cmp(a.as_str()))
            })
            .cloned()
            .unwrap_or_else(|| "NN".to_string())
    }

    fn tag_one(&self, i: usize, context: &[String], prev: &str, prev2: &str) -> String {
        let word = &context[i + 2];
        if let Some(tag) = hard_rule(word) {
            return tag;
        }
        if let Some(tag) = self.model.tagdict.get(word) {
            return tag.clone();
        }
        let feats = features(i, word, context, prev, prev2);
        self.predict(&feats)
    }
}

impl PosTagger for PerceptronTagger {
    fn tag(&self, tokens: &[String]) -> Result<Vec<String>> {
        if tokens.is_empty() {
            return Err(Error::Input("cannot tag an empty token list".into()));
        }
        let context = padded_context(tokens);
        let mut prev = START[0].to_string();
        let mut prev2 = START[1].to_string();
        let mut tags = Vec::with_capacity(tokens.len());
        for i in 0..tokens.len() {
            let tag = self.tag_one(i, &context, &prev, &prev2);
            prev2 = std::mem::replace(&mut prev, tag.clone());
            tags.push(tag);
        }
        Ok(tags)
    }
}

const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

fn normalize(word: &str) -> String {
    if word.contains('-') && word.chars().any(|c| c.is_ascii_digit()) {
        "!HYPHEN".to_string()
    } else if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        "!YEAR".to_string()
    } else if word.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        "!DIGITS".to_string()
    } else {
        word.to_lowercase()
    }
}

fn padded_context(tokens: &[String]) -> Vec<String> {
    let mut context: Vec<String> = START.iter().map(|s| s.to_string()).collect();
    context.extend(tokens.iter().map(|t| normalize(t)));
    context.extend(END.iter().map(|s| s.to_string()));
    context
}

fn suffix(word: &str) -> &str {
    let n = word.chars().count();
    if n <= 3 {
        word
    } else {
        let skip = word.char_indices().nth(n - 3).map(|(i, _)| i).unwrap_or(0);
        &word[skip..]
    }
}

fn features(i: usize, word: &str, context: &[String], prev: &str, prev2: &str) -> Vec<String> {
    let c = |offset: isize| -> &str {
        let idx = (i as isize + 2 + offset) as usize;
        &context[idx]
    };
    vec![
        "bias".to_string(),
        format!("i suffix {}", suffix(word)),
        format!("i pref1 {}", word.chars().next().unwrap_or(' ')),
        format!("i-1 tag {prev}"),
        format!("i-2 tag {prev2}"),
        format!("i tag+i-2 tag {prev} {prev2}"),
        format!("i word {}", c(0)),
        format!("i-1 tag+i word {prev} {}", c(0)),
        format!("i-1 word {}", c(-1)),
        format!("i-1 suffix {}", suffix(c(-1))),
        format!("i-2 word {}", c(-2)),
        format!("i+1 word {}", c(1)),
        format!("i+1 suffix {}", suffix(c(1))),
        format!("i+2 word {}", c(2)),
    ]
}

fn hard_rule(normalized_word: &str) -> Option<String> {
    if normalized_word.starts_with('!') {
        // normalize() markers for numeric tokens
        return Some("CD".to_string());
    }
    let mut chars = normalized_word.chars();
    if chars.clone().next().is_some() && chars.all(|c| c.is_ascii_punctuation() || !c.is_alphanumeric()) {
        return Some("SYM".to_string());
    }
    if normalized_word
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '%'))
        && normalized_word.chars().any(|c| c.is_ascii_digit())
    {
        return Some("CD".to_string());
    }
    None
}

/// Train an averaged perceptron on tagged sentences. Deterministic for
/// a fixed seed. Used by the `train-tagger` binary; the library only
/// ships inference.
pub fn train(
    sentences: &[Vec<(String, String)>],
    iterations: usize,
    seed: u64,
) -> Result<TaggerModel> {
    if sentences.is_empty() {
        return Err(Error::Input("no training sentences".into()));
    }
    let tagdict = build_tagdict(sentences, 3, 0.97);
    let mut classes: Vec<String> = sentences
        .iter()
        .flatten()
        .map(|(_, t)| t.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    classes.sort();

    // weights plus accumulators for averaging
    let mut weights: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut totals: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut timestamps: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut instances: u64 = 0;

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let predict = |weights: &BTreeMap<String, BTreeMap<String, f64>>,
                   classes: &[String],
                   feats: &[String]| {
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for f in feats {
            if let Some(tw) = weights.get(f) {
                for (tag, w) in tw {
                    *scores.entry(tag).or_insert(0.0) += w;
                }
            }
        }
        classes
            .iter()
            .max_by(|a, b| {
                let sa = scores.get(a.as_str()).copied().unwrap_or(0.0);
                let sb = scores.get(b.as_str()).copied().unwrap_or(0.0);
                sa.partial_cmp(&sb)
                    .unwrap()
                    .then_with(|| b.as_str().cmp(a.as_str()))
            })
            .cloned()
            .unwrap()
    };

    for _ in 0..iterations {
        order.shuffle(&mut rng);
        for &si in &order {
            let sentence = &sentences[si];
            let tokens: Vec<String> = sentence.iter().map(|(w, _)| w.clone()).collect();
            let context = padded_context(&tokens);
            let mut prev = START[0].to_string();
            let mut prev2 = START[1].to_string();
            for (i, (_, gold)) in sentence.iter().enumerate() {
                let word = &context[i + 2];
                let guess = if let Some(tag) = hard_rule(word) {
                    tag
                } else if let Some(tag) = tagdict.get(word) {
                    tag.clone()
                } else {
                    instances += 1;
                    let feats = features(i, word, &context, &prev, &prev2);
                    let guess = predict(&weights, &classes, &feats);
                    if &guess != gold {
                        for f in &feats {
                            for (tag, delta) in [(gold.clone(), 1.0), (guess.clone(), -1.0)] {
                                let key = (f.clone(), tag.clone());
                                let w = weights
                                    .entry(f.clone())
                                    .or_default()
                                    .entry(tag)
                                    .or_insert(0.0);
                                let last = timestamps.get(&key).copied().unwrap_or(0);
                                *totals.entry(key.clone()).or_insert(0.0) +=
                                    (instances - last) as f64 * *w;
                                timestamps.insert(key, instances);
                                *w += delta;
                            }
                        }
                    }
                    guess
                };
                prev2 = std::mem::replace(&mut prev, guess);
            }
        }
    }

    // average
    for (feat, tag_weights) in weights.iter_mut() {
        for (tag, w) in tag_weights.iter_mut() {
            let key = (feat.clone(), tag.clone());
            let last = timestamps.get(&key).copied().unwrap_or(0);
            let total =
                totals.get(&key).copied().unwrap_or(0.0) + (instances - last) as f64 * *w;
            *w = if instances > 0 {
                (total / instances as f64 * 1e6).round() / 1e6
            } else {
                *w
            };
        }
    }
    weights.retain(|_, tw| {
        tw.retain(|_, w| *w != 0.0);
        !tw.is_empty()
    });

    Ok(TaggerModel {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        classes,
        tagdict,
        weights,
    })
}

fn build_tagdict(
    sentences: &[Vec<(String, String)>],
    min_freq: usize,
    ambiguity: f64,
) -> BTreeMap<String, String> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (word, tag) in sentences.iter().flatten() {
        let norm = normalize(word);
        *counts.entry(norm).or_default().entry(tag.clone()).or_insert(0) += 1;
    }
    let mut dict = BTreeMap::new();
    for (word, tag_counts) in counts {
        let total: usize = tag_counts.values().sum();
        let (best_tag, best) = tag_counts
            .iter()
            .max_by_key(|(_, c)| **c)
            .map(|(t, c)| (t.clone(), *c))
            .unwrap();
        if total >= min_freq && best as f64 / total as f64 >= ambiguity {
            dict.insert(word, best_tag);
        }
    }
    dict
}

/// Parse `token<TAB>tag` training data, blank line between sentences.
pub fn parse_training_data(text: &str) -> Result<Vec<Vec<(String, String)>>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (word, tag) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
            line: lineno + 1,
            message: format!("expected token<TAB>tag, got {line:?}"),
        })?;
        current.push((word.to_string(), tag.to_string()));
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::PosTagger;

    #[test]
    fn builtin_weights_load() {
        let tagger = PerceptronTagger::builtin().unwrap();
        assert!(!tagger.model().classes.is_empty());
    }

    #[test]
    fn tags_reference_examples() {
        let tagger = PerceptronTagger::builtin().unwrap();
        let tags = tagger
            .tag(&["Deep".to_string(), "learning".to_string()])
            .unwrap();
        assert_eq!(tags, vec!["JJ", "NN"]);
        let tags = tagger.tag(&["the".to_string()]).unwrap();
        assert_eq!(tags, vec!["DT"]);
    }

    #[test]
    fn empty_input_rejected() {
        let tagger = PerceptronTagger::builtin().unwrap();
        assert!(tagger.tag(&[]).is_err());
    }

    #[test]
    fn deterministic_repeated_calls() {
        let tagger = PerceptronTagger::builtin().unwrap();
        let tokens: Vec<String> = ["Neural", "networks", "rank", "keyphrase", "candidates", "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let a = tagger.tag(&tokens).unwrap();
        let b = tagger.tag(&tokens).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), tokens.len());
    }

    #[test]
    fn punctuation_and_numbers_hard_ruled() {
        let tagger = PerceptronTagger::builtin().unwrap();
        let tags = tagger
            .tag(&[".".to_string(), "1984".to_string(), "3.5".to_string()])
            .unwrap();
        assert_eq!(tags, vec!["SYM", "CD", "CD"]);
    }

    #[test]
    fn corrupt_weights_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(PerceptronTagger::load(&path).is_err());
        let missing = dir.path().join("absent.json");
        assert!(PerceptronTagger::load(&missing).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = parse_training_data("the\tDT\ncat\tNN\nsleeps\tVBZ\n\nthe\tDT\ndog\tNN\nruns\tVBZ\n").unwrap();
        let a = train(&data, 3, 7).unwrap();
        let b = train(&data, 3, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
