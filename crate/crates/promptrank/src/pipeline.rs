//! End-to-end orchestration: preprocess, extract, score, rank per
//! document; corpus runs with worker-level parallelism and an
//! evaluation report.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backend::BackendSpec;
use crate::candidates::{extract_candidates, Candidate};
use crate::corpus::CorpusRecord;
use crate::eval::{dedup_ranked, evaluate, normalize_phrase, EvalConfig, EvalReport};
use crate::preprocess::{preprocess, PosTagger, TaggedDocument, DEFAULT_POSITION_CAP};
use crate::ranker::{rank, RankerConfig, ScoredCandidate};
use crate::scorer::{score_document, Backend, CandidateLogProbs, ScorerConfig};
use crate::templates;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scorer: ScorerConfig,
    pub ranker: RankerConfig,
    /// None loads the builtin tagger weights.
    pub tagger_weights_path: Option<PathBuf>,
    pub backend: BackendSpec,
    pub workers: usize,
    pub position_cap: usize,
    /// Drop gold phrases whose stemmed form does not occur in the
    /// stemmed document text before evaluation.
    pub filter_absent_gold: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scorer: ScorerConfig::default(),
            ranker: RankerConfig::default(),
            tagger_weights_path: None,
            backend: BackendSpec::default(),
            workers: 1,
            position_cap: DEFAULT_POSITION_CAP,
            filter_absent_gold: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        if !self.ranker.gamma.is_finite() || self.ranker.gamma <= 0.0 {
            return Err(Error::Config(format!(
                "gamma must be > 0, got {}",
                self.ranker.gamma
            )));
        }
        if self.ranker.top_k == 0 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.position_cap == 0 {
            return Err(Error::Config("position cap must be >= 1".into()));
        }
        Ok(())
    }

    pub fn load_tagger(&self) -> Result<crate::tagger::PerceptronTagger> {
        match &self.tagger_weights_path {
            Some(path) => crate::tagger::PerceptronTagger::load(path),
            None => crate::tagger::PerceptronTagger::builtin(),
        }
    }
}

/// One document scored but not yet ranked: everything the ranker and
/// the hyperparameter sweeps need.
#[derive(Debug, Clone)]
pub struct ScoredDocument {
    pub len_effective: usize,
    pub entries: Vec<(Candidate, CandidateLogProbs)>,
}

impl ScoredDocument {
    /// Re-rank from cached log-probs; alpha and gamma are post-hoc
    /// arithmetic over the cached token scores.
    pub fn rank_with(&self, scorer: &ScorerConfig, ranker: &RankerConfig) -> Vec<ScoredCandidate> {
        let doc = TaggedDocument {
            tokens: Vec::new(),
            tags: Vec::new(),
            len_effective: self.len_effective,
        };
        let scored = self
            .entries
            .iter()
            .map(|(c, lp)| (c.clone(), crate::scorer::score_candidate(lp, scorer)))
            .collect();
        rank(scored, &doc, ranker)
    }
}

/// Preprocess, extract, and score one document, returning the cacheable
/// intermediate.
pub fn score_text(
    text: &str,
    tagger: &dyn PosTagger,
    backend: &mut dyn Backend,
    cfg: &PipelineConfig,
) -> Result<ScoredDocument> {
    cfg.validate()?;
    let doc = preprocess(text, tagger, cfg.position_cap)?;
    let candidates = extract_candidates(&doc);
    if candidates.is_empty() {
        log::info!("no noun-phrase candidates found in document");
        return Ok(ScoredDocument {
            len_effective: doc.len_effective,
            entries: Vec::new(),
        });
    }
    let template = templates::lookup(&cfg.scorer.template_id)?;
    let scored = score_document(text, &candidates, &template, backend, &cfg.scorer)?;
    Ok(ScoredDocument {
        len_effective: doc.len_effective,
        entries: scored.into_iter().map(|(c, lp, _)| (c, lp)).collect(),
    })
}

/// The full four-step pipeline for one document.
pub fn extract_keyphrases(
    text: &str,
    tagger: &dyn PosTagger,
    backend: &mut dyn Backend,
    cfg: &PipelineConfig,
) -> Result<Vec<ScoredCandidate>> {
    Ok(score_text(text, tagger, backend, cfg)?.rank_with(&cfg.scorer, &cfg.ranker))
}

/// Per-document ranked predictions, the persisted JSONL unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPrediction {
    pub id: String,
    pub ranked: Vec<PhraseScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseScore {
    pub phrase: String,
    pub p: f64,
    pub r: f64,
    pub s: f64,
}

impl DocPrediction {
    fn from_ranked(id: &str, ranked: &[ScoredCandidate]) -> Self {
        DocPrediction {
            id: id.to_string(),
            ranked: ranked
                .iter()
                .map(|sc| PhraseScore {
                    phrase: sc.candidate.surface.clone(),
                    p: sc.p_c,
                    r: sc.r_c,
                    s: sc.s_c,
                })
                .collect(),
        }
    }
}

/// A document that failed during a corpus run; the run itself carries
/// on.
#[derive(Debug)]
pub struct DocFailure {
    pub id: String,
    pub error: Error,
}

#[derive(Debug)]
pub struct CorpusRunOutput {
    pub report: EvalReport,
    pub predictions: Vec<DocPrediction>,
    pub failures: Vec<DocFailure>,
}

/// Run the pipeline over a corpus with `cfg.workers` parallel workers,
/// each owning its own backend session, then evaluate. Results are
/// merged by document order, so every reported number is independent of
/// the worker count.
pub fn run_corpus(
    corpus: &[CorpusRecord],
    cfg: &PipelineConfig,
    ks: &[usize],
    macro_average: bool,
) -> Result<CorpusRunOutput> {
    if corpus.is_empty() {
        return Err(Error::Input("corpus is empty".into()));
    }
    cfg.validate()?;
    templates::lookup(&cfg.scorer.template_id)?;
    let tagger = cfg.load_tagger()?;

    type DocSlot = Mutex<Option<std::result::Result<Vec<ScoredCandidate>, Error>>>;
    let next = AtomicUsize::new(0);
    let results: Vec<DocSlot> = (0..corpus.len()).map(|_| Mutex::new(None)).collect();

    let workers = cfg.workers.min(corpus.len());
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for _ in 0..workers {
            handles.push(scope.spawn(|| -> Result<()> {
                let mut backend = cfg.backend.create()?;
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= corpus.len() {
                        return Ok(());
                    }
                    let outcome =
                        extract_keyphrases(&corpus[i].text, &tagger, backend.as_mut(), cfg)
                            .map_err(|e| match e {
                                Error::Backend {
                                    message,
                                    batch_index,
                                    ..
                                } => Error::Backend {
                                    message,
                                    doc_id: Some(corpus[i].id.clone()),
                                    batch_index,
                                },
                                other => other,
                            });
                    *results[i].lock().unwrap() = Some(outcome);
                }
            }));
        }
        for handle in handles {
            handle.join().expect("worker panicked")?;
        }
        Ok(())
    })?;

    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    let mut kept_records = Vec::new();
    for (record, slot) in corpus.iter().zip(results) {
        match slot.into_inner().unwrap().expect("every document visited") {
            Ok(ranked) => {
                predictions.push(DocPrediction::from_ranked(&record.id, &ranked));
                kept_records.push(record.clone());
            }
            Err(error) => failures.push(DocFailure {
                id: record.id.clone(),
                error,
            }),
        }
    }

    let report = evaluate_predictions(
        &predictions,
        &kept_records,
        &EvalConfig {
            ks: ks.to_vec(),
            macro_average,
        },
        cfg.filter_absent_gold,
    )?;
    Ok(CorpusRunOutput {
        report,
        predictions,
        failures,
    })
}

/// Evaluate persisted predictions against a corpus, re-normalizing both
/// sides. Usable with cached predictions without re-scoring.
pub fn evaluate_predictions(
    predictions: &[DocPrediction],
    corpus: &[CorpusRecord],
    eval_cfg: &EvalConfig,
    filter_absent_gold: bool,
) -> Result<EvalReport> {
    let by_id: std::collections::HashMap<&str, &CorpusRecord> =
        corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut pred_lists = Vec::with_capacity(predictions.len());
    let mut gold_sets = Vec::with_capacity(predictions.len());
    for prediction in predictions {
        let record = by_id.get(prediction.id.as_str()).ok_or_else(|| {
            Error::Input(format!(
                "prediction for unknown document id {:?}",
                prediction.id
            ))
        })?;
        let normalized: Vec<String> = prediction
            .ranked
            .iter()
            .map(|ps| normalize_phrase(&ps.phrase))
            .collect();
        pred_lists.push(dedup_ranked(&normalized));
        let mut gold: HashSet<String> = record
            .gold
            .iter()
            .filter(|g| !g.trim().is_empty())
            .map(|g| normalize_phrase(g))
            .collect();
        if filter_absent_gold {
            let doc_norm = format!(" {} ", normalize_phrase(&record.text));
            gold.retain(|g| doc_norm.contains(&format!(" {g} ")));
        }
        gold_sets.push(gold);
    }
    Ok(evaluate(&pred_lists, &gold_sets, eval_cfg))
}

/// Write predictions as JSONL.
pub fn save_predictions(path: &Path, predictions: &[DocPrediction]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for prediction in predictions {
        serde_json::to_writer(&mut w, prediction).map_err(|e| Error::Input(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read predictions JSONL.
pub fn load_predictions(path: &Path) -> Result<Vec<DocPrediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: lineno + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}
