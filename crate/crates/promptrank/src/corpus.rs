//! Benchmark corpus loading and dataset statistics.
//!
//! The canonical on-disk format is JSON-Lines: one object per line with
//! keys `id`, `text`, and `gold`. Converters from upstream benchmark
//! layouts live outside the library.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    /// Gold keyphrase surface forms; may be empty.
    pub gold: Vec<String>,
}

/// Aggregate dataset statistics in the shape of the benchmark tables.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub n_doc: usize,
    pub avg_len_words: f64,
    pub total_candidates: Option<usize>,
    pub total_gold: usize,
    /// Gold phrase word-length distribution, in percent, bucketed
    /// 1, 2, 3, 4, and 5+.
    pub gold_length_histogram: BTreeMap<String, f64>,
}

/// Load a JSONL corpus in file order, with no normalization.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                message: "empty id".into(),
            });
        }
        if record.text.is_empty() {
            return Err(Error::MalformedLine {
                line: lineno + 1,
                message: format!("record {:?} has empty text", record.id),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId { id: record.id });
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records as JSONL, one object per line.
pub fn save_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::Input(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Document count, mean whitespace-word length, gold totals, and the
/// gold length histogram. `candidates_per_doc`, when available from a
/// pipeline run, fills `total_candidates`.
pub fn compute_stats(
    corpus: &[CorpusRecord],
    candidates_per_doc: Option<&[usize]>,
) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::Input("cannot compute stats of an empty corpus".into()));
    }
    let total_words: usize = corpus
        .iter()
        .map(|r| r.text.split_whitespace().count())
        .sum();
    let mut bucket_counts = [0usize; 5];
    let mut total_gold = 0usize;
    for record in corpus {
        for phrase in &record.gold {
            let len = phrase.split_whitespace().count();
            if len == 0 {
                continue;
            }
            total_gold += 1;
            bucket_counts[len.min(5) - 1] += 1;
        }
    }
    let mut gold_length_histogram = BTreeMap::new();
    for (i, count) in bucket_counts.iter().enumerate() {
        let key = if i < 4 { (i + 1).to_string() } else { "5+".to_string() };
        let pct = if total_gold > 0 {
            100.0 * *count as f64 / total_gold as f64
        } else {
            0.0
        };
        gold_length_histogram.insert(key, pct);
    }
    Ok(CorpusStats {
        n_doc: corpus.len(),
        avg_len_words: total_words as f64 / corpus.len() as f64,
        total_candidates: candidates_per_doc.map(|c| c.iter().sum()),
        total_gold,
        gold_length_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(lines: &[&str]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, lines.join("\n")).unwrap();
        (dir, path)
    }

    #[test]
    fn single_line_parses() {
        let (_d, path) =
            write_lines(&[r#"{"id":"a","text":"Deep learning.","gold":["deep learning"]}"#]);
        let records = load_corpus(&path).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].id, "a");
        assert_eq!(records[0].gold.len(), 1);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let (_d, path) = write_lines(&[]);
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let (_d, path) = write_lines(&[
            r#"{"id":"a","text":"x","gold":[]}"#,
            r#"{"id":"a","text":"y","gold":[]}"#,
        ]);
        match load_corpus(&path) {
            Err(Error::DuplicateId { id }) => assert_eq!(id, "a"),
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let (_d, path) = write_lines(&[r#"{"id":"a","text":"x","gold":[]}"#, "{oops"]);
        match load_corpus(&path) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_preserves_records() {
        let records = vec![
            CorpusRecord {
                id: "a".into(),
                text: "Some \"quoted\" text\nwith a newline.".into(),
                gold: vec!["quoted text".into()],
            },
            CorpusRecord {
                id: "b".into(),
                text: "plain".into(),
                gold: vec![],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.jsonl");
        save_corpus(&path, &records).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), records);
    }

    #[test]
    fn stats_hand_count() {
        let corpus = vec![CorpusRecord {
            id: "a".into(),
            text: "a b c".into(),
            gold: vec!["a b".into()],
        }];
        let stats = compute_stats(&corpus, None).unwrap();
        assert_eq!(stats.n_doc, 1);
        assert_eq!(stats.avg_len_words, 3.0);
        assert_eq!(stats.total_gold, 1);
        assert_eq!(stats.gold_length_histogram["2"], 100.0);
        assert_eq!(stats.gold_length_histogram["1"], 0.0);
    }

    #[test]
    fn histogram_percentages_sum_to_100() {
        let corpus = vec![CorpusRecord {
            id: "a".into(),
            text: "text".into(),
            gold: vec![
                "one".into(),
                "two words".into(),
                "three word phrase".into(),
                "a four word phrase".into(),
                "a very long gold phrase here".into(),
                "another two".into(),
                "third one".into(),
            ],
        }];
        let stats = compute_stats(&corpus, None).unwrap();
        let total: f64 = stats.gold_length_histogram.values().sum();
        assert!((total - 100.0).abs() < 0.1);
    }

    #[test]
    fn stats_permutation_invariant() {
        let a = CorpusRecord {
            id: "a".into(),
            text: "one two".into(),
            gold: vec!["one".into()],
        };
        let b = CorpusRecord {
            id: "b".into(),
            text: "three four five six".into(),
            gold: vec!["four five".into()],
        };
        let s1 = compute_stats(&[a.clone(), b.clone()], None).unwrap();
        let s2 = compute_stats(&[b, a], None).unwrap();
        assert_eq!(
            serde_json::to_string(&s1).unwrap(),
            serde_json::to_string(&s2).unwrap()
        );
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(compute_stats(&[], None).is_err());
    }
}
