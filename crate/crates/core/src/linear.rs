//! Linear classifiers over sparse TF-IDF rows: multinomial logistic
//! regression (mini-batch gradient descent) and a one-vs-rest linear SVM
//! trained with the Pegasos stochastic subgradient method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, NUM_CLASSES};
use crate::math::{neg_log, softmax3};
use crate::rng::{derive_seed, SplitMix64};
use crate::tfidf::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    SvmLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub dim: usize,
    /// Row-major `NUM_CLASSES × dim`.
    pub weights: Vec<f64>,
    pub bias: [f64; NUM_CLASSES],
    pub l2: f64,
    /// Training objective after each completed epoch.
    pub training_log: Vec<f64>,
    /// Number of stochastic updates performed (Pegasos only).
    #[serde(default)]
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            lr: 0.1,
            l2: 1e-4,
            epochs: 50,
            batch: 32,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            l2: 1e-4,
            epochs: 100,
            seed: 42,
        }
    }
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, dim: usize) -> Self {
        LinearModel {
            kind,
            dim,
            weights: vec![0.0; NUM_CLASSES * dim],
            bias: [0.0; NUM_CLASSES],
            l2: 0.0,
            training_log: Vec::new(),
            steps: 0,
        }
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Decision values `W·x + b`.
    pub fn predict_scores(&self, x: &SparseVector) -> Result<[f64; NUM_CLASSES]> {
        if x.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim,
            });
        }
        Ok(scores_of(&self.weights, &self.bias, self.dim, x))
    }

    /// Softmax of the decision values; only meaningful for the logistic kind.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<[f64; NUM_CLASSES]> {
        Ok(softmax3(&self.predict_scores(x)?))
    }

    pub fn has_probabilities(&self) -> bool {
        self.kind == LinearKind::Logistic
    }
}

fn scores_of(weights: &[f64], bias: &[f64; NUM_CLASSES], dim: usize, x: &SparseVector) -> [f64; NUM_CLASSES] {
    let mut s = *bias;
    for (k, sk) in s.iter_mut().enumerate() {
        let row = &weights[k * dim..(k + 1) * dim];
        *sk += x.dot_dense(row);
    }
    s
}

fn check_training_set(x: &[SparseVector], y: &[Label]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let dim = x[0].dim;
    if let Some(bad) = x.iter().find(|v| v.dim != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.dim,
        });
    }
    for class in Label::ALL {
        if !y.contains(&class) {
            return Err(Error::MissingClass(class));
        }
    }
    Ok(dim)
}

/// Mean softmax cross-entropy plus `(l2 / 2)·‖W‖²` (bias unregularized), and
/// its gradient with respect to `(W, b)`.
pub fn logistic_objective_and_grad(
    weights: &[f64],
    bias: &[f64; NUM_CLASSES],
    dim: usize,
    x: &[SparseVector],
    y: &[Label],
    l2: f64,
) -> (f64, Vec<f64>, [f64; NUM_CLASSES]) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = [0.0; NUM_CLASSES];
    for (xi, &yi) in x.iter().zip(y) {
        let p = softmax3(&scores_of(weights, bias, dim, xi));
        loss += neg_log(p[yi.index()]);
        for k in 0..NUM_CLASSES {
            let r = (p[k] - if k == yi.index() { 1.0 } else { 0.0 }) / n;
            gb[k] += r;
            for (j, v) in xi.iter() {
                gw[k * dim + j] += r * v;
            }
        }
    }
    let reg = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss / n + reg, gw, gb)
}

pub fn logistic_objective(
    weights: &[f64],
    bias: &[f64; NUM_CLASSES],
    dim: usize,
    x: &[SparseVector],
    y: &[Label],
    l2: f64,
) -> f64 {
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let p = softmax3(&scores_of(weights, bias, dim, xi));
        loss += neg_log(p[yi.index()]);
    }
    let reg = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    loss / x.len() as f64 + reg
}

const MAX_HALVINGS: usize = 5;
const MONOTONE_TOL: f64 = 1e-6;

/// Mini-batch gradient descent on the regularized cross-entropy.
///
/// An epoch that raises the full training objective by more than `1e-6` is
/// rolled back and retried with half the learning rate (same sample order);
/// after five failed halvings training stops at the last accepted epoch.
pub fn fit_logistic(x: &[SparseVector], y: &[Label], cfg: &LogisticConfig) -> Result<LinearModel> {
    let dim = check_training_set(x, y)?;
    if cfg.batch == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("batch and epochs must be >= 1".into()));
    }
    let mut model = LinearModel::zeros(LinearKind::Logistic, dim);
    model.l2 = cfg.l2;
    let mut lr = cfg.lr;
    let mut prev = logistic_objective(&model.weights, &model.bias, dim, x, y, cfg.l2);
    let mut order: Vec<usize> = (0..x.len()).collect();

    'epochs: for epoch in 0..cfg.epochs {
        order.sort_unstable();
        SplitMix64::new(derive_seed(cfg.seed, epoch as u64)).shuffle(&mut order);
        let mut halvings = 0;
        loop {
            let mut w = model.weights.clone();
            let mut b = model.bias;
            for batch in order.chunks(cfg.batch) {
                sgd_batch(&mut w, &mut b, dim, x, y, batch, lr, cfg.l2);
            }
            let obj = logistic_objective(&w, &b, dim, x, y, cfg.l2);
            if obj.is_finite() && obj <= prev + MONOTONE_TOL {
                model.weights = w;
                model.bias = b;
                model.training_log.push(obj);
                prev = obj;
                break;
            }
            if halvings == MAX_HALVINGS {
                if !obj.is_finite() {
                    return Err(Error::Diverged);
                }
                break 'epochs;
            }
            halvings += 1;
            lr *= 0.5;
        }
    }
    if model.training_log.is_empty() {
        model.training_log.push(prev);
    }
    Ok(model)
}

#[allow(clippy::too_many_arguments)]
fn sgd_batch(
    w: &mut [f64],
    b: &mut [f64; NUM_CLASSES],
    dim: usize,
    x: &[SparseVector],
    y: &[Label],
    batch: &[usize],
    lr: f64,
    l2: f64,
) {
    let scale = 1.0 / batch.len() as f64;
    // residuals are computed at the pre-update point
    let residuals: Vec<[f64; NUM_CLASSES]> = batch
        .iter()
        .map(|&i| {
            let mut p = softmax3(&scores_of(w, b, dim, &x[i]));
            p[y[i].index()] -= 1.0;
            p
        })
        .collect();
    if l2 != 0.0 {
        let shrink = 1.0 - lr * l2;
        w.iter_mut().for_each(|v| *v *= shrink);
    }
    for (&i, r) in batch.iter().zip(&residuals) {
        for k in 0..NUM_CLASSES {
            let g = lr * r[k] * scale;
            b[k] -= g;
            let row = &mut w[k * dim..(k + 1) * dim];
            for (j, v) in x[i].iter() {
                row[j] -= g * v;
            }
        }
    }
}

/// Pegasos learning rate at update `t` (1-based): `1 / (l2 · t)`.
pub fn pegasos_step(l2: f64, t: u64) -> f64 {
    1.0 / (l2 * t as f64)
}

/// One binary Pegasos learner; the weight vector is stored as `scale · v` so
/// the per-step shrink costs O(1). The bias is an extra constant feature.
struct PegasosState {
    v: Vec<f64>,
    v_bias: f64,
    scale: f64,
    v_norm_sq: f64,
}

impl PegasosState {
    fn new(dim: usize) -> Self {
        PegasosState {
            v: vec![0.0; dim],
            v_bias: 0.0,
            scale: 1.0,
            v_norm_sq: 0.0,
        }
    }

    fn margin_raw(&self, x: &SparseVector) -> f64 {
        self.scale * (x.dot_dense(&self.v) + self.v_bias)
    }

    fn step(&mut self, x: &SparseVector, x_norm_sq: f64, target: f64, eta: f64, l2: f64) {
        let violated = target * self.margin_raw(x) < 1.0;
        let shrink = 1.0 - eta * l2;
        if shrink <= 0.0 {
            self.v.iter_mut().for_each(|v| *v = 0.0);
            self.v_bias = 0.0;
            self.scale = 1.0;
            self.v_norm_sq = 0.0;
        } else {
            self.scale *= shrink;
        }
        if violated {
            let a = eta * target / self.scale;
            let vx = x.dot_dense(&self.v) + self.v_bias;
            self.v_norm_sq += 2.0 * a * vx + a * a * (x_norm_sq + 1.0);
            for (j, val) in x.iter() {
                self.v[j] += a * val;
            }
            self.v_bias += a;
        }
        let radius = 1.0 / l2.sqrt();
        let norm = self.scale * self.v_norm_sq.max(0.0).sqrt();
        if norm > radius {
            self.scale *= radius / norm;
        }
        if self.scale < 1e-9 {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        let s = self.scale;
        self.v.iter_mut().for_each(|v| *v *= s);
        self.v_bias *= s;
        self.v_norm_sq = self.v.iter().map(|v| v * v).sum::<f64>() + self.v_bias * self.v_bias;
        self.scale = 1.0;
    }

    fn objective(&self, x: &[SparseVector], targets: impl Iterator<Item = f64>, l2: f64) -> f64 {
        let hinge: f64 = x
            .iter()
            .zip(targets)
            .map(|(xi, t)| (1.0 - t * self.margin_raw(xi)).max(0.0))
            .sum();
        0.5 * l2 * self.scale * self.scale * self.v_norm_sq + hinge / x.len() as f64
    }
}

/// One-vs-rest Pegasos: for each shuffled sample, every class learner takes a
/// subgradient step with rate `1 / (l2 · t)` followed by projection onto the
/// ball of radius `1 / sqrt(l2)`.
pub fn fit_svm(x: &[SparseVector], y: &[Label], cfg: &SvmConfig) -> Result<LinearModel> {
    let dim = check_training_set(x, y)?;
    if !(cfg.l2 > 0.0) {
        return Err(Error::InvalidArgument("svm l2 must be > 0".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be >= 1".into()));
    }
    let norms: Vec<f64> = x.iter().map(|v| v.values.iter().map(|a| a * a).sum()).collect();
    let mut learners: Vec<PegasosState> = (0..NUM_CLASSES).map(|_| PegasosState::new(dim)).collect();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t: u64 = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = pegasos_step(cfg.l2, t);
            for (k, learner) in learners.iter_mut().enumerate() {
                let target = if y[i].index() == k { 1.0 } else { -1.0 };
                learner.step(&x[i], norms[i], target, eta, cfg.l2);
            }
        }
        let obj: f64 = learners
            .iter()
            .enumerate()
            .map(|(k, l)| l.objective(x, y.iter().map(|yi| if yi.index() == k { 1.0 } else { -1.0 }), cfg.l2))
            .sum::<f64>()
            / NUM_CLASSES as f64;
        if !obj.is_finite() {
            return Err(Error::Diverged);
        }
        log.push(obj);
    }
    let mut model = LinearModel::zeros(LinearKind::SvmLinear, dim);
    model.l2 = cfg.l2;
    model.training_log = log;
    model.steps = t;
    for (k, learner) in learners.iter_mut().enumerate() {
        learner.renormalize();
        model.weights[k * dim..(k + 1) * dim].copy_from_slice(&learner.v);
        model.bias[k] = learner.v_bias;
    }
    Ok(model)
}
