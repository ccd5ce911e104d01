//! Keyphrase extraction CLI: extract, eval, sweep, score-dump, stats.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use promptrank::backend::BackendSpec;
use promptrank::corpus::{compute_stats, load_corpus, CorpusRecord};
use promptrank::eval::{EvalConfig, DEFAULT_KS};
use promptrank::pipeline::{
    evaluate_predictions, extract_keyphrases, load_predictions, run_corpus, save_predictions,
    score_text, DocPrediction, PhraseScore, PipelineConfig,
};
use promptrank::ranker::{RankerConfig, DEFAULT_GAMMA};
use promptrank::scorer::{ScorerConfig, DEFAULT_ALPHA, DEFAULT_ENCODER_MAX_TOKENS};
use promptrank::{Error, Result};

#[derive(Parser)]
#[command(name = "promptrank", about = "Unsupervised keyphrase extraction", version)]
struct Cli {
    #[command(flatten)]
    opts: CommonOpts,

    /// Print the merged configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

/// Flags mirror the config-file keys; flags override the file, the file
/// overrides the defaults.
#[derive(Args, Default, Clone)]
struct CommonOpts {
    /// Config file (flat TOML with these same keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Length-normalization exponent.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Position penalty constant.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Template id.
    #[arg(long, global = true)]
    template: Option<String>,
    /// Disable the position penalty.
    #[arg(long, global = true)]
    no_position: bool,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Evaluation cutoffs, comma-separated.
    #[arg(long, global = true)]
    ks: Option<String>,
    #[arg(long, global = true)]
    encoder_max_tokens: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Backend family: stub, stub:<seed>, t5, or bart.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Model weights directory for t5/bart.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// POS tagger weights file; the built-in weights are the default.
    #[arg(long, global = true)]
    tagger_weights: Option<PathBuf>,
    /// Macro-average evaluation metrics per document.
    #[arg(long = "macro", global = true)]
    macro_average: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Extract keyphrases from a text file (or stdin).
    Extract {
        /// Input text file; stdin when omitted.
        input: Option<PathBuf>,
        /// Emit all candidates with scores as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run over a corpus and report F1@K.
    Eval {
        corpus: PathBuf,
        /// Re-evaluate cached predictions instead of scoring.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Persist per-document predictions as JSONL.
        #[arg(long)]
        save_predictions: Option<PathBuf>,
    },
    /// Sweep one hyperparameter over corpora, emitting CSV.
    Sweep {
        /// One of: alpha, gamma, template.
        parameter: String,
        /// Comma-separated values to sweep.
        values: String,
        /// Corpus JSONL files.
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
    },
    /// Per-candidate final scores for one document.
    ScoreDump {
        input: Option<PathBuf>,
        /// Emit raw s scores instead of min-max normalized ones.
        #[arg(long)]
        raw: bool,
    },
    /// Corpus statistics.
    Stats { corpus: PathBuf },
}

/// The flat config-file schema; every key mirrors a flag.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    gamma: Option<f64>,
    template: Option<String>,
    no_position: Option<bool>,
    top_k: Option<usize>,
    ks: Option<Vec<usize>>,
    encoder_max_tokens: Option<usize>,
    batch_size: Option<usize>,
    workers: Option<usize>,
    backend: Option<String>,
    weights: Option<PathBuf>,
    tagger_weights: Option<PathBuf>,
    macro_average: Option<bool>,
}

#[derive(Debug)]
struct Settings {
    pipeline: PipelineConfig,
    ks: Vec<usize>,
    macro_average: bool,
}

fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad --ks value {s:?}")))?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("cutoffs must be positive".into()));
    }
    Ok(ks)
}

fn merge(opts: &CommonOpts) -> Result<Settings> {
    let file: FileConfig = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("bad config file: {e}")))?
        }
        None => FileConfig::default(),
    };
    let ks = match (&opts.ks, file.ks) {
        (Some(s), _) => parse_ks(s)?,
        (None, Some(ks)) => ks,
        (None, None) => DEFAULT_KS.to_vec(),
    };
    let backend_family = opts
        .backend
        .clone()
        .or(file.backend)
        .unwrap_or_else(|| "stub:42".to_string());
    let pipeline = PipelineConfig {
        scorer: ScorerConfig {
            alpha: opts.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            encoder_max_tokens: opts
                .encoder_max_tokens
                .or(file.encoder_max_tokens)
                .unwrap_or(DEFAULT_ENCODER_MAX_TOKENS),
            batch_size: opts.batch_size.or(file.batch_size).unwrap_or(16),
            template_id: opts
                .template
                .clone()
                .or(file.template)
                .unwrap_or_else(|| promptrank::templates::DEFAULT_TEMPLATE_ID.to_string()),
            include_eos: false,
        },
        ranker: RankerConfig {
            gamma: opts.gamma.or(file.gamma).unwrap_or(DEFAULT_GAMMA),
            use_position: !(opts.no_position || file.no_position.unwrap_or(false)),
            top_k: opts.top_k.or(file.top_k).unwrap_or(10),
        },
        tagger_weights_path: opts.tagger_weights.clone().or(file.tagger_weights),
        backend: BackendSpec::new(&backend_family, opts.weights.clone().or(file.weights)),
        workers: opts.workers.or(file.workers).unwrap_or(1),
        position_cap: promptrank::preprocess::DEFAULT_POSITION_CAP,
        filter_absent_gold: false,
    };
    pipeline.validate()?;
    Ok(Settings {
        pipeline,
        ks,
        macro_average: opts.macro_average || file.macro_average.unwrap_or(false),
    })
}

/// The merged settings in the config-file schema, so the printed form
/// reloads via --config.
fn to_file_config(settings: &Settings) -> FileConfig {
    let p = &settings.pipeline;
    FileConfig {
        alpha: Some(p.scorer.alpha),
        gamma: Some(p.ranker.gamma),
        template: Some(p.scorer.template_id.clone()),
        no_position: Some(!p.ranker.use_position),
        top_k: Some(p.ranker.top_k),
        ks: Some(settings.ks.clone()),
        encoder_max_tokens: Some(p.scorer.encoder_max_tokens),
        batch_size: Some(p.scorer.batch_size),
        workers: Some(p.workers),
        backend: Some(p.backend.family.clone()),
        weights: p.backend.weights.clone(),
        tagger_weights: p.tagger_weights_path.clone(),
        macro_average: Some(settings.macro_average),
    }
}

fn read_input(input: &Option<PathBuf>) -> Result<String> {
    match input {
        Some(path) if path != Path::new("-") => {
            std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
        }
        _ => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Error::io("<stdin>", e))?;
            Ok(text)
        }
    }
}

fn cmd_extract(settings: &Settings, input: &Option<PathBuf>, json: bool) -> Result<()> {
    let text = read_input(input)?;
    let tagger = settings.pipeline.load_tagger()?;
    let mut backend = settings.pipeline.backend.create()?;
    let ranked = extract_keyphrases(&text, &tagger, backend.as_mut(), &settings.pipeline)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&ranked).unwrap());
    } else {
        for sc in ranked.iter().filter(|sc| sc.predicted) {
            println!("{}", sc.candidate.surface);
        }
    }
    Ok(())
}

fn cmd_eval(
    settings: &Settings,
    corpus_path: &Path,
    predictions: &Option<PathBuf>,
    save: &Option<PathBuf>,
) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let eval_cfg = EvalConfig {
        ks: settings.ks.clone(),
        macro_average: settings.macro_average,
    };
    let report = match predictions {
        Some(path) => {
            let cached = load_predictions(path)?;
            evaluate_predictions(&cached, &corpus, &eval_cfg, settings.pipeline.filter_absent_gold)?
        }
        None => {
            let out = run_corpus(&corpus, &settings.pipeline, &settings.ks, settings.macro_average)?;
            for failure in &out.failures {
                eprintln!("document {:?} failed: {}", failure.id, failure.error);
            }
            if let Some(path) = save {
                save_predictions(path, &out.predictions)?;
            }
            if !out.failures.is_empty() {
                println!("{}", serde_json::to_string_pretty(&out.report).unwrap());
                return Err(Error::backend(format!(
                    "{} of {} documents failed",
                    out.failures.len(),
                    corpus.len()
                )));
            }
            out.report
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn csv_row(value: &str, dataset: &str, k: usize, m: Option<promptrank::eval::PrF1>) {
    match m {
        Some(m) => println!("{value},{dataset},{k},{:.6},{:.6},{:.6}", m.p, m.r, m.f1),
        None => println!("{value},{dataset},{k},,,"),
    }
}

fn cmd_sweep(settings: &Settings, parameter: &str, values: &str, corpora: &[PathBuf]) -> Result<()> {
    let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    match parameter {
        "alpha" | "gamma" => {
            for v in &values {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad {parameter} value {v:?}")))?;
            }
        }
        "template" => {
            for v in &values {
                promptrank::templates::lookup(v)?;
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep parameter {other:?}; expected alpha, gamma, or template"
            )))
        }
    }
    let eval_cfg = EvalConfig {
        ks: settings.ks.clone(),
        macro_average: settings.macro_average,
    };
    println!("value,dataset,k,precision,recall,f1");
    for corpus_path in corpora {
        let dataset = dataset_name(corpus_path);
        let corpus = load_corpus(corpus_path)?;
        if parameter == "template" {
            for value in &values {
                let mut cfg = settings.pipeline.clone();
                cfg.scorer.template_id = value.to_string();
                match run_corpus(&corpus, &cfg, &settings.ks, settings.macro_average) {
                    Ok(out) => {
                        for &k in &settings.ks {
                            csv_row(value, &dataset, k, Some(out.report.per_k[&k]));
                        }
                    }
                    Err(e) => {
                        eprintln!("sweep cell {value}/{dataset} failed: {e}");
                        for &k in &settings.ks {
                            csv_row(value, &dataset, k, None);
                        }
                    }
                }
            }
            continue;
        }
        // alpha and gamma are post-hoc arithmetic over cached token
        // log-probs: score the corpus once, re-rank per value
        let tagger = settings.pipeline.load_tagger()?;
        let mut backend = settings.pipeline.backend.create()?;
        let mut scored = Vec::new();
        let mut failed = false;
        for record in &corpus {
            match score_text(&record.text, &tagger, backend.as_mut(), &settings.pipeline) {
                Ok(s) => scored.push(s),
                Err(e) => {
                    eprintln!("sweep dataset {dataset} failed on doc {:?}: {e}", record.id);
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            for value in &values {
                for &k in &settings.ks {
                    csv_row(value, &dataset, k, None);
                }
            }
            continue;
        }
        for value in &values {
            let mut scorer = settings.pipeline.scorer.clone();
            let mut ranker = settings.pipeline.ranker.clone();
            match parameter {
                "alpha" => scorer.alpha = value.parse().unwrap(),
                _ => ranker.gamma = value.parse().unwrap(),
            }
            let predictions: Vec<DocPrediction> = corpus
                .iter()
                .zip(&scored)
                .map(|(record, sd)| DocPrediction {
                    id: record.id.clone(),
                    ranked: sd
                        .rank_with(&scorer, &ranker)
                        .into_iter()
                        .map(|sc| PhraseScore {
                            phrase: sc.candidate.surface.clone(),
                            p: sc.p_c,
                            r: sc.r_c,
                            s: sc.s_c,
                        })
                        .collect(),
                })
                .collect();
            let report = evaluate_predictions(
                &predictions,
                &corpus,
                &eval_cfg,
                settings.pipeline.filter_absent_gold,
            )?;
            for &k in &settings.ks {
                csv_row(value, &dataset, k, Some(report.per_k[&k]));
            }
        }
    }
    Ok(())
}

fn cmd_score_dump(settings: &Settings, input: &Option<PathBuf>, raw: bool) -> Result<()> {
    let text = read_input(input)?;
    let tagger = settings.pipeline.load_tagger()?;
    let mut backend = settings.pipeline.backend.create()?;
    let ranked = extract_keyphrases(&text, &tagger, backend.as_mut(), &settings.pipeline)?;
    let mut map: BTreeMap<String, f64> = BTreeMap::new();
    if raw {
        for sc in &ranked {
            map.insert(sc.candidate.surface.clone(), sc.s_c);
        }
    } else if !ranked.is_empty() {
        let min = ranked.iter().map(|sc| sc.s_c).fold(f64::INFINITY, f64::min);
        let max = ranked.iter().map(|sc| sc.s_c).fold(f64::NEG_INFINITY, f64::max);
        for sc in &ranked {
            // degenerate min-max (single candidate or all ties) maps to 1.0
            let norm = if max > min { (sc.s_c - min) / (max - min) } else { 1.0 };
            map.insert(sc.candidate.surface.clone(), norm);
        }
    }
    println!("{}", serde_json::to_string_pretty(&map).unwrap());
    Ok(())
}

fn cmd_stats(settings: &Settings, corpus_path: &Path) -> Result<()> {
    let _ = settings;
    let corpus: Vec<CorpusRecord> = load_corpus(corpus_path)?;
    let stats = compute_stats(&corpus, None)?;
    println!("{}", serde_json::to_string_pretty(&stats).unwrap());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let settings = merge(&cli.opts)?;
    if cli.print_config {
        print!("{}", toml::to_string(&to_file_config(&settings)).unwrap());
        return Ok(());
    }
    match &cli.command {
        None => Err(Error::Config("a subcommand is required; see --help".into())),
        Some(Command::Extract { input, json }) => cmd_extract(&settings, input, *json),
        Some(Command::Eval {
            corpus,
            predictions,
            save_predictions,
        }) => cmd_eval(&settings, corpus, predictions, save_predictions),
        Some(Command::Sweep {
            parameter,
            values,
            corpora,
        }) => cmd_sweep(&settings, parameter, values, corpora),
        Some(Command::ScoreDump { input, raw }) => cmd_score_dump(&settings, input, *raw),
        Some(Command::Stats { corpus }) => cmd_stats(&settings, corpus),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Backend { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
