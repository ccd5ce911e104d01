//! Produce the tagger weights file shipped in `data/tagger-weights.json`
//! from `token<TAB>tag` training data.
//!
//! Usage: `train-tagger <train.tsv> <weights.json> [iterations] [seed]`

use std::process::ExitCode;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: train-tagger <train.tsv> <weights.json> [iterations] [seed]");
        return ExitCode::from(2);
    }
    let iterations: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(8);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1);

    let text = match std::fs::read_to_string(&args[0]) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args[0]);
            return ExitCode::from(2);
        }
    };
    let sentences = match promptrank::tagger::parse_training_data(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let model = match promptrank::tagger::train(&sentences, iterations, seed) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("training failed: {e}");
            return ExitCode::from(2);
        }
    };

    // held-in accuracy, just as a sanity line
    let tagger = promptrank::tagger::PerceptronTagger::from_model(model.clone()).unwrap();
    let mut correct = 0usize;
    let mut total = 0usize;
    for sentence in &sentences {
        let tokens: Vec<String> = sentence.iter().map(|(w, _)| w.clone()).collect();
        let tags = promptrank::preprocess::PosTagger::tag(&tagger, &tokens).unwrap();
        for ((_, gold), guess) in sentence.iter().zip(&tags) {
            total += 1;
            if gold == guess {
                correct += 1;
            }
        }
    }
    eprintln!(
        "trained on {} sentences, {} features, train accuracy {:.1}%",
        sentences.len(),
        model.weights.len(),
        100.0 * correct as f64 / total as f64
    );

    let json = serde_json::to_string(&model).unwrap();
    if let Err(e) = std::fs::write(&args[1], json) {
        eprintln!("cannot write {}: {e}", args[1]);
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
