//! Bidirectional LSTM sentiment classifier: vocabulary, configuration,
//! Adam training loop with early stopping, and batch inference.

pub mod net;

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{argmax, Label, NUM_CLASSES};
use crate::metrics;
use crate::rng::{derive_seed, SplitMix64};
use crate::text_prep::CleanDocument;

pub use net::{dropout_mask, gradient_check, BilstmNet, Dims, Direction, GradCheckReport, Layout, SeqMasks};

pub const PAD: u32 = 0;
pub const OOV: u32 = 1;
const PAD_TOKEN: &str = "<pad>";
const OOV_TOKEN: &str = "<oov>";

const STREAM_INIT: u64 = 0x1_0000;
const STREAM_SHUFFLE: u64 = 0x2_0000;
const STREAM_DROPOUT: u64 = 0x3_0000;
/// Sequences per gradient work unit; fixed so results do not depend on the
/// thread count.
const CHUNK: usize = 4;

/// Token → id map. Id 0 is padding, id 1 is out-of-vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeuralVocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl NeuralVocab {
    /// Keeps the `max_size - 2` most frequent training tokens, ties broken
    /// lexicographically.
    pub fn build(docs: &[CleanDocument], max_size: usize) -> Result<Self> {
        if max_size < 3 {
            return Err(Error::InvalidArgument("vocabulary size must be >= 3".into()));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for d in docs {
            for t in &d.tokens {
                *freq.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        if freq.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut ranked: Vec<(&str, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_size - 2);
        let mut tokens = vec![PAD_TOKEN.to_string(), OOV_TOKEN.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Ok(Self::from_tokens(tokens))
    }

    pub(crate) fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        NeuralVocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        match self.index.get(token) {
            Some(&i) if i > OOV => i,
            _ => OOV,
        }
    }

    /// Ids of the first `seq_len` tokens, right-padded with PAD.
    pub fn encode(&self, doc: &CleanDocument, seq_len: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = doc.tokens.iter().take(seq_len).map(|t| self.id(t)).collect();
        ids.resize(seq_len, PAD);
        ids
    }
}

impl<'de> Deserialize<'de> for NeuralVocab {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            tokens: Vec<String>,
        }
        Ok(NeuralVocab::from_tokens(Raw::deserialize(d)?.tokens))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BilstmConfig {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub emb_dim: usize,
    pub hidden: usize,
    pub dense: usize,
    pub dropout: f64,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for BilstmConfig {
    fn default() -> Self {
        BilstmConfig {
            vocab_size: 10_000,
            seq_len: 64,
            emb_dim: 128,
            hidden: 64,
            dense: 64,
            dropout: 0.3,
            batch: 32,
            epochs: 20,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patience: 3,
            clip_norm: 5.0,
            seed: 42,
        }
    }
}

impl BilstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.seq_len == 0 || self.emb_dim == 0 || self.hidden == 0 || self.dense == 0 {
            return bad("seq_len, emb_dim, hidden and dense must be >= 1");
        }
        if self.batch == 0 || self.epochs == 0 {
            return bad("batch and epochs must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.lr >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("lr must be >= 0 and clip_norm > 0");
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> Dims {
        Dims {
            vocab,
            emb: self.emb_dim,
            hidden: self.hidden,
            dense: self.dense,
            classes: NUM_CLASSES,
        }
    }
}

/// Trainable parameter count for a vocabulary of `vocab` ids.
pub fn param_count(vocab: usize, cfg: &BilstmConfig) -> usize {
    cfg.dims(vocab).param_count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub val_macro_f1: f64,
}

pub fn curves_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc,val_macro_f1\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.val_macro_f1
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilstmModel {
    pub config: BilstmConfig,
    pub vocab: NeuralVocab,
    pub net: BilstmNet<f32>,
    pub curves: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept; 0 if untrained.
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f32], grads: &[f32], cfg: &BilstmConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = cfg.lr as f32;
        let eps = cfg.eps as f32;
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f32], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

fn check_lengths(docs: usize, labels: usize) -> Result<()> {
    if docs != labels {
        return Err(Error::DimensionMismatch {
            expected: docs,
            got: labels,
        });
    }
    Ok(())
}

impl BilstmModel {
    /// Freshly initialized (untrained) model over `vocab`.
    pub fn init(vocab: NeuralVocab, config: BilstmConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(derive_seed(config.seed, STREAM_INIT));
        let net = BilstmNet::init(config.dims(vocab.len()), &mut rng);
        Ok(BilstmModel {
            config,
            vocab,
            net,
            curves: Vec::new(),
            best_epoch: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn encode(&self, doc: &CleanDocument) -> Vec<u32> {
        self.vocab.encode(doc, self.config.seq_len)
    }

    pub fn predict_proba_ids(&self, ids: &[Vec<u32>]) -> Result<Vec<[f64; NUM_CLASSES]>> {
        ids.par_iter()
            .map(|s| {
                let c = self.net.forward_one(s, None)?;
                Ok([c.probs[0] as f64, c.probs[1] as f64, c.probs[2] as f64])
            })
            .collect()
    }

    pub fn predict_proba(&self, docs: &[CleanDocument]) -> Result<Vec<[f64; NUM_CLASSES]>> {
        let ids: Vec<Vec<u32>> = docs.iter().map(|d| self.encode(d)).collect();
        self.predict_proba_ids(&ids)
    }

    pub fn predict(&self, docs: &[CleanDocument]) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(docs)?
            .iter()
            .map(|p| Label::from_index(argmax(p)).expect("three classes"))
            .collect())
    }

    /// Builds the vocabulary from `train`, then trains with Adam, keeping the
    /// parameters of the epoch with the best validation macro-F1.
    pub fn train(
        train: &[CleanDocument],
        train_y: &[Label],
        val: &[CleanDocument],
        val_y: &[Label],
        config: &BilstmConfig,
    ) -> Result<Self> {
        Self::train_with(train, train_y, val, val_y, config, |_| {})
    }

    pub fn train_with(
        train: &[CleanDocument],
        train_y: &[Label],
        val: &[CleanDocument],
        val_y: &[Label],
        config: &BilstmConfig,
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<Self> {
        config.validate()?;
        check_lengths(train.len(), train_y.len())?;
        check_lengths(val.len(), val_y.len())?;
        if train.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        if val.is_empty() {
            return Err(Error::InvalidArgument("validation set is empty; early stopping needs one".into()));
        }
        let vocab = NeuralVocab::build(train, config.vocab_size)?;
        let mut model = Self::init(vocab, *config)?;
        let x: Vec<Vec<u32>> = train.iter().map(|d| model.encode(d)).collect();
        let y: Vec<usize> = train_y.iter().map(|l| l.index()).collect();
        let vx: Vec<Vec<u32>> = val.iter().map(|d| model.encode(d)).collect();
        model.fit_encoded(&x, &y, &vx, val_y, &mut on_epoch)?;
        Ok(model)
    }

    fn fit_encoded(
        &mut self,
        x: &[Vec<u32>],
        y: &[usize],
        vx: &[Vec<u32>],
        vy: &[Label],
        on_epoch: &mut dyn FnMut(&EpochRecord),
    ) -> Result<()> {
        let cfg = self.config;
        let mut adam = Adam::new(self.net.param_count());
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut best_f1 = f64::NEG_INFINITY;
        let mut best_params = self.net.params.clone();
        let mut since_best = 0;
        let d = self.net.dims;

        for epoch in 0..cfg.epochs {
            order.sort_unstable();
            SplitMix64::new(derive_seed(cfg.seed, STREAM_SHUFFLE + epoch as u64)).shuffle(&mut order);
            let mut drop_rng = SplitMix64::new(derive_seed(cfg.seed, STREAM_DROPOUT + epoch as u64));
            let mut loss_sum = 0.0;
            let mut correct = 0usize;

            for batch in order.chunks(cfg.batch) {
                let masks: Vec<Option<SeqMasks<f32>>> = batch
                    .iter()
                    .map(|_| {
                        (cfg.dropout > 0.0).then(|| SeqMasks {
                            spatial: dropout_mask(&mut drop_rng, d.emb, cfg.dropout),
                            features: dropout_mask(&mut drop_rng, d.feature_len(), cfg.dropout),
                        })
                    })
                    .collect();
                let bsz = batch.len() as f32;
                let net = &self.net;
                let parts: Vec<Result<(f32, Vec<f32>, Vec<Vec<f32>>)>> = batch
                    .par_chunks(CHUNK)
                    .zip(masks.par_chunks(CHUNK))
                    .map(|(idx, m)| {
                        let seqs: Vec<Vec<u32>> = idx.iter().map(|&i| x[i].clone()).collect();
                        let labels: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
                        net.loss_and_grad(&seqs, &labels, m.to_vec(), idx.len() as f32 / bsz)
                    })
                    .collect();
                let mut grads = vec![0.0f32; net.param_count()];
                let mut batch_loss = 0.0f64;
                let mut k = 0;
                for part in parts {
                    let (l, g, probs) = part?;
                    batch_loss += l as f64;
                    grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    for p in probs {
                        if argmax(&p.iter().map(|&v| v as f64).collect::<Vec<_>>()) == y[batch[k]] {
                            correct += 1;
                        }
                        k += 1;
                    }
                }
                if !batch_loss.is_finite() {
                    return Err(Error::Diverged);
                }
                loss_sum += batch_loss * batch.len() as f64;
                clip_global_norm(&mut grads, cfg.clip_norm);
                adam.step(&mut self.net.params, &grads, &cfg);
            }

            let val_probs = self.predict_proba_ids(vx)?;
            let val_loss = val_probs
                .iter()
                .zip(vy)
                .map(|(p, l)| crate::math::neg_log(p[l.index()]))
                .sum::<f64>()
                / vx.len() as f64;
            if !val_loss.is_finite() {
                return Err(Error::Diverged);
            }
            let preds: Vec<Label> = val_probs
                .iter()
                .map(|p| Label::from_index(argmax(p)).expect("three classes"))
                .collect();
            let rep = metrics::evaluate(vy, &preds, None)?;
            let rec = EpochRecord {
                epoch: epoch + 1,
                train_loss: loss_sum / x.len() as f64,
                train_acc: correct as f64 / x.len() as f64,
                val_loss,
                val_acc: rep.accuracy,
                val_macro_f1: rep.macro_f1,
            };
            self.curves.push(rec);
            on_epoch(&rec);
            if rep.macro_f1 > best_f1 {
                best_f1 = rep.macro_f1;
                best_params.copy_from_slice(&self.net.params);
                self.best_epoch = epoch + 1;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
        self.net.params = best_params;
        Ok(())
    }
}
