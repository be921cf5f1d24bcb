//! Embedding → bidirectional LSTM → dense(ReLU) → dense → softmax, with
//! hand-written backpropagation through time.
//!
//! All parameters live in one flat buffer so the optimizer, gradient
//! clipping and serialization treat them uniformly. Gate blocks are ordered
//! input, forget, cell, output; each gate row holds `[x ; h]` weights.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub emb: usize,
    pub hidden: usize,
    pub dense: usize,
    pub classes: usize,
}

impl Dims {
    pub fn gate_rows(&self) -> usize {
        4 * self.hidden
    }

    pub fn gate_cols(&self) -> usize {
        self.emb + self.hidden
    }

    pub fn feature_len(&self) -> usize {
        2 * self.hidden
    }

    /// `V·E + 2·[4H·(E+H) + 4H] + (2H·D + D) + (D·C + C)`
    pub fn param_count(&self) -> usize {
        let lstm = self.gate_rows() * self.gate_cols() + self.gate_rows();
        self.vocab * self.emb
            + 2 * lstm
            + (self.feature_len() * self.dense + self.dense)
            + (self.dense * self.classes + self.classes)
    }
}

/// Offsets of each parameter tensor inside the flat buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub emb: usize,
    pub fwd_w: usize,
    pub fwd_b: usize,
    pub bwd_w: usize,
    pub bwd_b: usize,
    pub d1_w: usize,
    pub d1_b: usize,
    pub d2_w: usize,
    pub d2_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(d: &Dims) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let emb = take(d.vocab * d.emb);
        let fwd_w = take(d.gate_rows() * d.gate_cols());
        let fwd_b = take(d.gate_rows());
        let bwd_w = take(d.gate_rows() * d.gate_cols());
        let bwd_b = take(d.gate_rows());
        let d1_w = take(d.dense * d.feature_len());
        let d1_b = take(d.dense);
        let d2_w = take(d.classes * d.dense);
        let d2_b = take(d.classes);
        Layout {
            emb,
            fwd_w,
            fwd_b,
            bwd_w,
            bwd_b,
            d1_w,
            d1_b,
            d2_w,
            d2_b,
            total: at,
        }
    }

    /// Named `(name, start, len)` ranges, in storage order.
    pub fn tensors(&self) -> [(&'static str, usize, usize); 9] {
        [
            ("embedding", self.emb, self.fwd_w - self.emb),
            ("lstm_fwd.weight", self.fwd_w, self.fwd_b - self.fwd_w),
            ("lstm_fwd.bias", self.fwd_b, self.bwd_w - self.fwd_b),
            ("lstm_bwd.weight", self.bwd_w, self.bwd_b - self.bwd_w),
            ("lstm_bwd.bias", self.bwd_b, self.d1_w - self.bwd_b),
            ("dense1.weight", self.d1_w, self.d1_b - self.d1_w),
            ("dense1.bias", self.d1_b, self.d2_w - self.d1_b),
            ("dense2.weight", self.d2_w, self.d2_b - self.d2_w),
            ("dense2.bias", self.d2_b, self.total - self.d2_b),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilstmNet<F> {
    pub dims: Dims,
    pub layout: Layout,
    pub params: Vec<F>,
}

/// Saved activations of one LSTM step.
#[derive(Debug, Clone)]
pub struct StepCache<F> {
    pub token: usize,
    pub x: Vec<F>,
    pub h_prev: Vec<F>,
    pub c_prev: Vec<F>,
    /// `[i ; f ; g ; o]` post-activation.
    pub gates: Vec<F>,
    pub c: Vec<F>,
    pub tanh_c: Vec<F>,
    pub h: Vec<F>,
}

/// Dropout masks for one sequence: per-channel embedding mask (shared across
/// time steps) and per-unit mask on the concatenated final states. Entries
/// are `0` or `1/(1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqMasks<F> {
    pub spatial: Vec<F>,
    pub features: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct SeqCache<F> {
    pub fwd: Vec<StepCache<F>>,
    pub bwd: Vec<StepCache<F>>,
    pub masks: Option<SeqMasks<F>>,
    /// Dropped-out concatenated final states fed to dense1.
    pub features: Vec<F>,
    pub z1: Vec<F>,
    pub a1: Vec<F>,
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

#[inline]
pub(crate) fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [F::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = F::zero();
    for i in chunks * 8..n {
        tail = tail + a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy<F: Float>(y: &mut [F], alpha: F, x: &[F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[inline]
fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Inverted-dropout mask: each entry kept with probability `1 - p` and scaled by `1/(1-p)`.
pub fn dropout_mask<F: Float>(rng: &mut SplitMix64, len: usize, p: f64) -> Vec<F> {
    let keep = F::from(1.0 / (1.0 - p)).unwrap();
    (0..len)
        .map(|_| if rng.next_f64() < p { F::zero() } else { keep })
        .collect()
}

pub fn softmax<F: Float>(logits: &[F]) -> Vec<F> {
    let m = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = logits.iter().map(|&z| (z - m).exp()).collect();
    let z = e.iter().cloned().fold(F::zero(), |a, b| a + b);
    e.into_iter().map(|v| v / z).collect()
}

impl<F: Float> BilstmNet<F> {
    pub fn zeros(dims: Dims) -> Self {
        let layout = Layout::new(&dims);
        BilstmNet {
            dims,
            layout,
            params: vec![F::zero(); layout.total],
        }
    }

    /// Embedding `U(±0.1)`, LSTM weights `U(±1/√H)` with forget-gate bias 1,
    /// dense layers Glorot-uniform with zero bias.
    pub fn init(dims: Dims, rng: &mut SplitMix64) -> Self {
        let mut net = Self::zeros(dims);
        let l = net.layout;
        let mut fill = |p: &mut [F], a: f64| {
            for v in p.iter_mut() {
                *v = F::from(rng.uniform(-a, a)).unwrap();
            }
        };
        let k = 1.0 / (dims.hidden as f64).sqrt();
        fill(&mut net.params[l.emb..l.fwd_w], 0.1);
        fill(&mut net.params[l.fwd_w..l.fwd_b], k);
        fill(&mut net.params[l.bwd_w..l.bwd_b], k);
        let g1 = (6.0 / (dims.feature_len() + dims.dense) as f64).sqrt();
        fill(&mut net.params[l.d1_w..l.d1_b], g1);
        let g2 = (6.0 / (dims.dense + dims.classes) as f64).sqrt();
        fill(&mut net.params[l.d2_w..l.d2_b], g2);
        for b in [l.fwd_b, l.bwd_b] {
            for j in dims.hidden..2 * dims.hidden {
                net.params[b + j] = F::one();
            }
        }
        net
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn dir_offsets(&self, dir: Direction) -> (usize, usize) {
        match dir {
            Direction::Forward => (self.layout.fwd_w, self.layout.fwd_b),
            Direction::Backward => (self.layout.bwd_w, self.layout.bwd_b),
        }
    }

    fn embedding(&self, token: usize) -> &[F] {
        let e = self.dims.emb;
        &self.params[self.layout.emb + token * e..self.layout.emb + (token + 1) * e]
    }

    fn lstm_step(&self, dir: Direction, token: usize, x: Vec<F>, h_prev: Vec<F>, c_prev: Vec<F>) -> StepCache<F> {
        let d = self.dims;
        let (wo, bo) = self.dir_offsets(dir);
        let cols = d.gate_cols();
        let hsz = d.hidden;
        let mut gates = vec![F::zero(); d.gate_rows()];
        for (r, gate) in gates.iter_mut().enumerate() {
            let row = &self.params[wo + r * cols..wo + (r + 1) * cols];
            let z = self.params[bo + r] + dot(&row[..d.emb], &x) + dot(&row[d.emb..], &h_prev);
            *gate = if (2 * hsz..3 * hsz).contains(&r) { z.tanh() } else { sigmoid(z) };
        }
        let mut c = vec![F::zero(); hsz];
        let mut tanh_c = vec![F::zero(); hsz];
        let mut h = vec![F::zero(); hsz];
        for j in 0..hsz {
            let (i, f, g, o) = (gates[j], gates[hsz + j], gates[2 * hsz + j], gates[3 * hsz + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        StepCache {
            token,
            x,
            h_prev,
            c_prev,
            gates,
            c,
            tanh_c,
            h,
        }
    }

    /// Runs one direction's cell over `inputs` in the given order, starting
    /// from zero state. Returns every step's cache.
    pub fn run_direction(&self, dir: Direction, inputs: &[(usize, Vec<F>)]) -> Vec<StepCache<F>> {
        let hsz = self.dims.hidden;
        let mut h = vec![F::zero(); hsz];
        let mut c = vec![F::zero(); hsz];
        let mut out = Vec::with_capacity(inputs.len());
        for (token, x) in inputs {
            let step = self.lstm_step(dir, *token, x.clone(), h, c);
            h = step.h.clone();
            c = step.c.clone();
            out.push(step);
        }
        out
    }

    /// Forward pass for one id sequence. PAD (id 0) steps are skipped in both
    /// directions, which carries the state through unchanged.
    pub fn forward_one(&self, ids: &[u32], masks: Option<SeqMasks<F>>) -> Result<SeqCache<F>> {
        let d = self.dims;
        let mut inputs = Vec::with_capacity(ids.len());
        for &id in ids {
            let id = id as usize;
            if id >= d.vocab {
                return Err(Error::InvalidArgument(format!(
                    "token id {id} out of range for vocabulary of {}",
                    d.vocab
                )));
            }
            if id == 0 {
                continue;
            }
            let mut x = self.embedding(id).to_vec();
            if let Some(m) = &masks {
                for (xi, &mi) in x.iter_mut().zip(&m.spatial) {
                    *xi = *xi * mi;
                }
            }
            inputs.push((id, x));
        }
        let fwd = self.run_direction(Direction::Forward, &inputs);
        inputs.reverse();
        let bwd = self.run_direction(Direction::Backward, &inputs);

        let hsz = d.hidden;
        let mut features = vec![F::zero(); 2 * hsz];
        if let Some(last) = fwd.last() {
            features[..hsz].copy_from_slice(&last.h);
        }
        if let Some(last) = bwd.last() {
            features[hsz..].copy_from_slice(&last.h);
        }
        if let Some(m) = &masks {
            for (v, &mi) in features.iter_mut().zip(&m.features) {
                *v = *v * mi;
            }
        }
        let l = self.layout;
        let flen = d.feature_len();
        let z1: Vec<F> = (0..d.dense)
            .map(|r| self.params[l.d1_b + r] + dot(&self.params[l.d1_w + r * flen..l.d1_w + (r + 1) * flen], &features))
            .collect();
        let a1: Vec<F> = z1.iter().map(|&z| z.max(F::zero())).collect();
        let logits: Vec<F> = (0..d.classes)
            .map(|r| self.params[l.d2_b + r] + dot(&self.params[l.d2_w + r * d.dense..l.d2_w + (r + 1) * d.dense], &a1))
            .collect();
        let probs = softmax(&logits);
        Ok(SeqCache {
            fwd,
            bwd,
            masks,
            features,
            z1,
            a1,
            logits,
            probs,
        })
    }

    /// Accumulates parameter gradients into `grads` given `dlogits = ∂L/∂logits`.
    pub fn backward_one(&self, cache: &SeqCache<F>, dlogits: &[F], grads: &mut [F]) {
        let d = self.dims;
        let l = self.layout;
        let flen = d.feature_len();

        let mut da1 = vec![F::zero(); d.dense];
        for (r, &dl) in dlogits.iter().enumerate() {
            grads[l.d2_b + r] = grads[l.d2_b + r] + dl;
            axpy(&mut grads[l.d2_w + r * d.dense..l.d2_w + (r + 1) * d.dense], dl, &cache.a1);
            axpy(&mut da1, dl, &self.params[l.d2_w + r * d.dense..l.d2_w + (r + 1) * d.dense]);
        }
        let mut dfeat = vec![F::zero(); flen];
        for r in 0..d.dense {
            if cache.z1[r] <= F::zero() {
                continue;
            }
            let dz = da1[r];
            grads[l.d1_b + r] = grads[l.d1_b + r] + dz;
            axpy(&mut grads[l.d1_w + r * flen..l.d1_w + (r + 1) * flen], dz, &cache.features);
            axpy(&mut dfeat, dz, &self.params[l.d1_w + r * flen..l.d1_w + (r + 1) * flen]);
        }
        if let Some(m) = &cache.masks {
            for (v, &mi) in dfeat.iter_mut().zip(&m.features) {
                *v = *v * mi;
            }
        }
        let hsz = d.hidden;
        let spatial = cache.masks.as_ref().map(|m| m.spatial.as_slice());
        self.bptt(Direction::Forward, &cache.fwd, &dfeat[..hsz], spatial, grads);
        self.bptt(Direction::Backward, &cache.bwd, &dfeat[hsz..], spatial, grads);
    }

    fn bptt(&self, dir: Direction, steps: &[StepCache<F>], dh_final: &[F], spatial: Option<&[F]>, grads: &mut [F]) {
        if steps.is_empty() {
            return;
        }
        let d = self.dims;
        let (wo, bo) = self.dir_offsets(dir);
        let cols = d.gate_cols();
        let hsz = d.hidden;
        let one = F::one();
        let mut dh = dh_final.to_vec();
        let mut dc = vec![F::zero(); hsz];
        let mut da = vec![F::zero(); d.gate_rows()];
        let mut dxh = vec![F::zero(); cols];
        for s in steps.iter().rev() {
            for j in 0..hsz {
                let (i, f, g, o) = (s.gates[j], s.gates[hsz + j], s.gates[2 * hsz + j], s.gates[3 * hsz + j]);
                let tc = s.tanh_c[j];
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (one - tc * tc);
                da[j] = dcj * g * i * (one - i);
                da[hsz + j] = dcj * s.c_prev[j] * f * (one - f);
                da[2 * hsz + j] = dcj * i * (one - g * g);
                da[3 * hsz + j] = d_o * o * (one - o);
                dc[j] = dcj * f;
            }
            dxh.iter_mut().for_each(|v| *v = F::zero());
            for (r, &dar) in da.iter().enumerate() {
                if dar == F::zero() {
                    continue;
                }
                grads[bo + r] = grads[bo + r] + dar;
                let grow = &mut grads[wo + r * cols..wo + (r + 1) * cols];
                axpy(&mut grow[..d.emb], dar, &s.x);
                axpy(&mut grow[d.emb..], dar, &s.h_prev);
                axpy(&mut dxh, dar, &self.params[wo + r * cols..wo + (r + 1) * cols]);
            }
            let e0 = self.layout.emb + s.token * d.emb;
            for k in 0..d.emb {
                let scale = spatial.map_or(one, |m| m[k]);
                grads[e0 + k] = grads[e0 + k] + dxh[k] * scale;
            }
            dh.copy_from_slice(&dxh[d.emb..]);
        }
    }

    /// Mean cross-entropy over the batch (times `loss_scale`) and its
    /// gradient. `masks` must be empty (no dropout) or one entry per sequence.
    pub fn loss_and_grad(
        &self,
        batch: &[Vec<u32>],
        labels: &[usize],
        masks: Vec<Option<SeqMasks<F>>>,
        loss_scale: F,
    ) -> Result<(F, Vec<F>, Vec<Vec<F>>)> {
        let mut grads = vec![F::zero(); self.params.len()];
        let n = F::from(batch.len()).unwrap();
        let mut loss = F::zero();
        let mut probs = Vec::with_capacity(batch.len());
        let mut masks = masks.into_iter();
        for (ids, &y) in batch.iter().zip(labels) {
            let cache = self.forward_one(ids, masks.next().flatten())?;
            let p = cache.probs[y].max(F::min_positive_value());
            loss = loss - p.ln();
            let mut dl: Vec<F> = cache.probs.iter().map(|&v| v * loss_scale / n).collect();
            dl[y] = dl[y] - loss_scale / n;
            self.backward_one(&cache, &dl, &mut grads);
            probs.push(cache.probs);
        }
        Ok((loss * loss_scale / n, grads, probs))
    }

    pub fn loss(&self, batch: &[Vec<u32>], labels: &[usize]) -> Result<F> {
        let mut loss = F::zero();
        for (ids, &y) in batch.iter().zip(labels) {
            let c = self.forward_one(ids, None)?;
            loss = loss - c.probs[y].max(F::min_positive_value()).ln();
        }
        Ok(loss / F::from(batch.len()).unwrap())
    }
}

/// Per-tensor comparison of analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `(tensor, ‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, 1e-12))`
    pub tensors: Vec<(&'static str, f64)>,
    pub max_relative_error: f64,
}

/// Finite-difference check of the full network at 64-bit precision with
/// dropout disabled. `step` is the central-difference half-width.
pub fn gradient_check(
    net: &BilstmNet<f64>,
    batch: &[Vec<u32>],
    labels: &[usize],
    step: f64,
) -> Result<GradCheckReport> {
    let (_, analytic, _) = net.loss_and_grad(batch, labels, Vec::new(), 1.0)?;
    let mut probe = net.clone();
    let mut tensors = Vec::new();
    let mut max_err: f64 = 0.0;
    for (name, start, len) in net.layout.tensors() {
        let mut diff = 0.0;
        let mut a_norm = 0.0;
        let mut n_norm = 0.0;
        for idx in start..start + len {
            let orig = probe.params[idx];
            probe.params[idx] = orig + step;
            let plus = probe.loss(batch, labels)?;
            probe.params[idx] = orig - step;
            let minus = probe.loss(batch, labels)?;
            probe.params[idx] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[idx];
            diff += (a - numeric) * (a - numeric);
            a_norm += a * a;
            n_norm += numeric * numeric;
        }
        let rel = diff.sqrt() / (a_norm.sqrt() + n_norm.sqrt()).max(1e-12);
        max_err = max_err.max(rel);
        tensors.push((name, rel));
    }
    Ok(GradCheckReport {
        tensors,
        max_relative_error: max_err,
    })
}
