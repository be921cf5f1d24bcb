#![allow(dead_code)]

use std::collections::BTreeMap;

use sentibench::corpus::LabeledExample;
use sentibench::Label;

/// `per_class[c]` examples of class `c`, ids `0..n` in class order.
pub fn labeled(per_class: [usize; 3]) -> Vec<LabeledExample> {
    let mut out = Vec::new();
    for (c, &n) in per_class.iter().enumerate() {
        for _ in 0..n {
            out.push(LabeledExample {
                id: out.len(),
                text: format!("doc {}", out.len()),
                label: Label::from_index(c).unwrap(),
                metadata: BTreeMap::new(),
            });
        }
    }
    out
}

pub fn from_labels(labels: &[Label]) -> Vec<LabeledExample> {
    labels
        .iter()
        .enumerate()
        .map(|(id, &label)| LabeledExample {
            id,
            text: format!("doc {id}"),
            label,
            metadata: BTreeMap::new(),
        })
        .collect()
}

use sentibench::bench::{self, synth, RunConfig};
use sentibench::bilstm::{BilstmConfig, BilstmModel};
use sentibench::model_store::{Classifier, Family, ModelArtifact};
use sentibench::rng::SplitMix64;
use sentibench::text_prep::CleanDocument;

/// Small but real models of every family, trained on a slice of the
/// synthetic corpus.
pub fn trained_artifact(family: Family, seed: u64) -> ModelArtifact {
    let corpus = synth::synthetic_corpus(300, seed);
    let cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let prep = bench::build_preprocessor(&cfg).unwrap();
    let docs: Vec<CleanDocument> = bench::preprocess_corpus(&prep, &corpus);
    let y: Vec<Label> = corpus.iter().map(|e| e.label).collect();
    let clf = match family {
        Family::Bilstm => {
            let bcfg = BilstmConfig {
                emb_dim: 8,
                hidden: 6,
                dense: 6,
                seq_len: 16,
                epochs: 2,
                seed,
                ..BilstmConfig::default()
            };
            Classifier::Bilstm(BilstmModel::train(&docs[..240], &y[..240], &docs[240..], &y[240..], &bcfg).unwrap())
        }
        _ => {
            let mut cfg = cfg.clone();
            cfg.logistic.epochs = 10;
            cfg.svm.epochs = 10;
            cfg.gbdt.n_rounds = 10;
            bench::fit_classical(family, &docs, &y, &cfg, seed).unwrap()
        }
    };
    ModelArtifact::new(prep, clf, seed, cfg.family_text(family))
}

/// Review-like strings: corpus words, slang, unknown words, emoji, noise and
/// the occasional empty or symbol-only input.
pub fn random_inputs(n: usize, seed: u64) -> Vec<String> {
    let vocab: Vec<&str> = synth::vocabulary().into_iter().collect();
    let extra = ["yg", "gk", "bgus", "😍", "😡", "http://t.co/x", "<i>", "!!!", "zzqx", "Mantap", "123", "ÉTÉ"];
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let len = rng.below(14) as usize;
            (0..len)
                .map(|_| {
                    if rng.next_f64() < 0.75 {
                        vocab[rng.below(vocab.len() as u64) as usize]
                    } else {
                        extra[rng.below(extra.len() as u64) as usize]
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn bundled_corpus() -> Vec<LabeledExample> {
    sentibench::corpus::read_csv(
        synth::BUNDLED_SYNTHETIC_CSV.as_bytes(),
        &sentibench::corpus::CorpusSchema::default(),
    )
    .unwrap()
}

/// Drops the last comma-separated column of every line.
pub fn without_last_column(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
