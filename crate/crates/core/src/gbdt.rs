//! Histogram-based, leaf-wise gradient boosting with a multiclass softmax
//! objective. One regression tree per class per round.
//!
//! Features are binned once: bin 0 holds exact zeros and the non-zero values
//! of a feature are split into quantile bins. A split sends non-zero bins
//! `1..=t` left and the zero bin to whichever side was learned for it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, NUM_CLASSES};
use crate::math::{neg_log, softmax3};
use crate::tfidf::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
    pub l2_leaf: f64,
    /// `None` means unlimited depth.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_rounds: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_leaf: 20,
            n_bins: 255,
            l2_leaf: 1.0,
            max_depth: None,
            seed: 42,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_rounds < 1 {
            return bad("n_rounds must be >= 1");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be >= 2");
        }
        if !(2..=255).contains(&self.n_bins) {
            return bad("n_bins must be in [2, 255]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.l2_leaf >= 0.0) {
            return bad("l2_leaf must be >= 0");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1 when set");
        }
        Ok(())
    }
}

/// Per-feature upper bounds of the non-zero bins, strictly increasing.
/// A non-zero value `v` falls in bin `1 + #{e in edges : e < v}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub edges: Vec<Vec<f64>>,
    /// Whether the feature had any non-zero value when binned.
    pub has_nonzero: Vec<bool>,
}

impl BinEdges {
    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    /// Number of bins for `feature`, counting the zero bin.
    pub fn n_bins(&self, feature: usize) -> usize {
        1 + self.nonzero_bins(feature)
    }

    fn nonzero_bins(&self, feature: usize) -> usize {
        if self.has_nonzero[feature] {
            self.edges[feature].len() + 1
        } else {
            0
        }
    }

    pub fn bin_of(&self, feature: usize, value: f64) -> usize {
        if value == 0.0 {
            return 0;
        }
        let e = &self.edges[feature];
        1 + e.partition_point(|&edge| edge < value)
    }

    /// Largest value routed into non-zero bin `t` (`t >= 1`).
    fn upper_bound(&self, feature: usize, t: usize) -> f64 {
        let e = &self.edges[feature];
        if t == 0 {
            f64::NEG_INFINITY
        } else if t > e.len() {
            f64::INFINITY
        } else {
            e[t - 1]
        }
    }
}

/// Quantile bin edges over the non-zero values of each feature. A feature that
/// contains zeros spends one of its `n_bins` on the dedicated zero bin.
pub fn build_histograms(x: &[SparseVector], n_bins: usize) -> BinEdges {
    let dim = x.first().map_or(0, |v| v.dim);
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for row in x {
        for (j, v) in row.iter() {
            values[j].push(v);
        }
    }
    let mut edges = Vec::with_capacity(dim);
    let mut has_nonzero = Vec::with_capacity(dim);
    for mut vals in values {
        has_nonzero.push(!vals.is_empty());
        if vals.is_empty() {
            edges.push(Vec::new());
            continue;
        }
        let has_zero = vals.len() < x.len();
        let budget = (n_bins - usize::from(has_zero)).max(1);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut distinct = vals.clone();
        distinct.dedup();
        let max = *distinct.last().unwrap();
        let mut e: Vec<f64> = if distinct.len() <= budget {
            distinct
        } else {
            let n = vals.len();
            (1..budget)
                .map(|i| vals[((i * n).div_ceil(budget)).saturating_sub(1)])
                .collect()
        };
        e.dedup();
        e.retain(|&v| v < max);
        edges.push(e);
    }
    BinEdges { edges, has_nonzero }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        /// Non-zero values `<= threshold` go left.
        threshold: f64,
        /// Routing of exact zeros.
        zero_left: bool,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value, samples: 0 }],
        }
    }

    pub fn predict(&self, x: &SparseVector) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    zero_left,
                    left,
                    right,
                    ..
                } => {
                    let v = lookup(x, *feature);
                    let go_left = if v == 0.0 { *zero_left } else { v <= *threshold };
                    idx = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, samples } => Some((*value, *samples)),
            _ => None,
        })
    }

    pub fn splits(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. }))
    }

    fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value, .. } = n {
                *value *= factor;
            }
        }
    }
}

fn lookup(x: &SparseVector, feature: usize) -> f64 {
    match x.indices.binary_search(&(feature as u32)) {
        Ok(pos) => x.values[pos],
        Err(_) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub dim: usize,
    /// Round-major: `trees[round * 3 + class]`.
    pub trees: Vec<RegressionTree>,
    pub bin_edges: BinEdges,
    pub config: GbdtConfig,
    /// Training multiclass log-loss after each completed round.
    pub training_log: Vec<f64>,
}

impl GbdtModel {
    pub fn empty(dim: usize, config: GbdtConfig) -> Self {
        GbdtModel {
            dim,
            trees: Vec::new(),
            bin_edges: BinEdges {
                edges: vec![Vec::new(); dim],
                has_nonzero: vec![false; dim],
            },
            config,
            training_log: Vec::new(),
        }
    }

    pub fn rounds(&self) -> usize {
        self.trees.len() / NUM_CLASSES
    }

    pub fn raw_scores(&self, x: &SparseVector) -> [f64; NUM_CLASSES] {
        let mut s = [0.0; NUM_CLASSES];
        for round in self.trees.chunks(NUM_CLASSES) {
            for (k, tree) in round.iter().enumerate() {
                s[k] += tree.predict(x);
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &SparseVector) -> [f64; NUM_CLASSES] {
        softmax3(&self.raw_scores(x))
    }
}

/// Row-wise binned training matrix plus flat histogram offsets.
struct Binned {
    rows: Vec<Vec<(u32, u8)>>,
    offsets: Vec<usize>,
    nz_bins: Vec<usize>,
    total_bins: usize,
}

impl Binned {
    fn new(x: &[SparseVector], edges: &BinEdges) -> Self {
        let rows = x
            .iter()
            .map(|r| r.iter().map(|(j, v)| (j as u32, edges.bin_of(j, v) as u8)).collect())
            .collect();
        let nz_bins: Vec<usize> = (0..edges.n_features()).map(|f| edges.nonzero_bins(f)).collect();
        let mut offsets = Vec::with_capacity(nz_bins.len());
        let mut acc = 0;
        for &n in &nz_bins {
            offsets.push(acc);
            acc += n;
        }
        Binned {
            rows,
            offsets,
            nz_bins,
            total_bins: acc,
        }
    }

    fn bin(&self, row: usize, feature: usize) -> usize {
        let r = &self.rows[row];
        match r.binary_search_by_key(&(feature as u32), |&(f, _)| f) {
            Ok(pos) => r[pos].1 as usize,
            Err(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn sub(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn add(self, o: Stats) -> Stats {
        Stats {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }
}

/// Non-zero-bin statistics for one node; zero-bin stats are derived from the node total.
struct Histogram {
    bins: Vec<Stats>,
    total: Stats,
}

impl Histogram {
    fn build(data: &Binned, rows: &[u32], g: &[f64], h: &[f64]) -> Self {
        let mut bins = vec![Stats::default(); data.total_bins];
        let mut total = Stats::default();
        for &r in rows {
            let r = r as usize;
            total.g += g[r];
            total.h += h[r];
            total.n += 1;
            for &(f, b) in &data.rows[r] {
                let s = &mut bins[data.offsets[f as usize] + b as usize - 1];
                s.g += g[r];
                s.h += h[r];
                s.n += 1;
            }
        }
        Histogram { bins, total }
    }

    fn subtract(&self, other: &Histogram) -> Histogram {
        Histogram {
            bins: self.bins.iter().zip(&other.bins).map(|(a, b)| a.sub(*b)).collect(),
            total: self.total.sub(other.total),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    feature: usize,
    t: usize,
    zero_left: bool,
    gain: f64,
}

fn score(s: Stats, lambda: f64) -> f64 {
    let d = s.h + lambda;
    if d > 0.0 {
        s.g * s.g / d
    } else {
        0.0
    }
}

/// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]`
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let l = Stats { g: gl, h: hl, n: 0 };
    let r = Stats { g: gr, h: hr, n: 0 };
    0.5 * (score(l, lambda) + score(r, lambda) - score(l.add(r), lambda))
}

fn best_split(data: &Binned, hist: &Histogram, cfg: &GbdtConfig) -> Option<SplitCandidate> {
    let total = hist.total;
    let lambda = cfg.l2_leaf;
    let parent = score(total, lambda);
    let min_n = cfg.min_samples_leaf.max(1);
    let mut best: Option<SplitCandidate> = None;
    for f in 0..data.nz_bins.len() {
        let nb = data.nz_bins[f];
        if nb == 0 {
            continue;
        }
        let bins = &hist.bins[data.offsets[f]..data.offsets[f] + nb];
        let nonzero = bins.iter().fold(Stats::default(), |a, b| a.add(*b));
        let zero = total.sub(nonzero);
        let mut cum = Stats::default();
        for t in 0..=nb {
            if t > 0 {
                cum = cum.add(bins[t - 1]);
            }
            for zero_left in [true, false] {
                let left = if zero_left { cum.add(zero) } else { cum };
                let right = total.sub(left);
                if left.n < min_n || right.n < min_n {
                    continue;
                }
                let gain = 0.5 * (score(left, lambda) + score(right, lambda) - parent);
                if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature: f,
                        t,
                        zero_left,
                        gain,
                    });
                }
            }
        }
    }
    best
}

fn leaf_value(s: Stats, lambda: f64, lr: f64) -> f64 {
    let d = s.h + lambda;
    if d > 0.0 {
        -s.g / d * lr
    } else {
        0.0
    }
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    hist: Histogram,
    depth: usize,
    best: Option<SplitCandidate>,
}

/// Grows one tree best-first. Returns the tree and, for each training row, the
/// leaf value it landed in.
fn grow_tree(
    data: &Binned,
    edges: &BinEdges,
    g: &[f64],
    h: &[f64],
    cfg: &GbdtConfig,
) -> (RegressionTree, Vec<f64>) {
    let depth_ok = |d: usize| cfg.max_depth.is_none_or(|m| d < m);
    let all: Vec<u32> = (0..data.rows.len() as u32).collect();
    let hist = Histogram::build(data, &all, g, h);
    let best = if depth_ok(0) { best_split(data, &hist, cfg) } else { None };
    let mut nodes = vec![Node::Leaf { value: 0.0, samples: all.len() }];
    let mut open = vec![OpenLeaf {
        node: 0,
        rows: all,
        hist,
        depth: 0,
        best,
    }];
    let mut n_leaves = 1;

    while n_leaves < cfg.max_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.map(|b| (i, b.gain)))
            .fold(None::<(usize, f64)>, |acc, (i, gain)| match acc {
                Some((_, g0)) if g0 >= gain => acc,
                _ => Some((i, gain)),
            });
        let Some((idx, _)) = pick else { break };
        let leaf = open.swap_remove(idx);
        let split = leaf.best.unwrap();
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
            let b = data.bin(r as usize, split.feature);
            if b == 0 {
                split.zero_left
            } else {
                b <= split.t
            }
        });
        let (small_rows, small_is_left) = if left_rows.len() <= right_rows.len() {
            (&left_rows, true)
        } else {
            (&right_rows, false)
        };
        let small = Histogram::build(data, small_rows, g, h);
        let large = leaf.hist.subtract(&small);
        let (lh, rh) = if small_is_left { (small, large) } else { (large, small) };

        let left_idx = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, samples: left_rows.len() });
        nodes.push(Node::Leaf { value: 0.0, samples: right_rows.len() });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: edges.upper_bound(split.feature, split.t),
            zero_left: split.zero_left,
            gain: split.gain,
            left: left_idx,
            right: left_idx + 1,
        };
        let depth = leaf.depth + 1;
        for (node, rows, hist) in [(left_idx, left_rows, lh), (left_idx + 1, right_rows, rh)] {
            let best = if depth_ok(depth) { best_split(data, &hist, cfg) } else { None };
            open.push(OpenLeaf {
                node,
                rows,
                hist,
                depth,
                best,
            });
        }
        n_leaves += 1;
    }

    let mut row_values = vec![0.0; data.rows.len()];
    for leaf in &open {
        let v = leaf_value(leaf.hist.total, cfg.l2_leaf, cfg.learning_rate);
        nodes[leaf.node] = Node::Leaf {
            value: v,
            samples: leaf.rows.len(),
        };
        for &r in &leaf.rows {
            row_values[r as usize] = v;
        }
    }
    (RegressionTree { nodes }, row_values)
}

fn log_loss(scores: &[[f64; NUM_CLASSES]], y: &[Label]) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(s, yi)| neg_log(softmax3(s)[yi.index()]))
        .sum::<f64>()
        / y.len() as f64
}

const MAX_BACKTRACKS: usize = 30;

/// Boosts `cfg.n_rounds` rounds. If a round's Newton step would raise the
/// training log-loss, its leaf values are halved until it does not; a round
/// that cannot be made non-increasing ends training.
pub fn fit(x: &[SparseVector], y: &[Label], cfg: &GbdtConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidArgument("need equal, non-zero numbers of rows and labels".into()));
    }
    for class in Label::ALL {
        if !y.contains(&class) {
            return Err(Error::MissingClass(class));
        }
    }
    let dim = x[0].dim;
    let edges = build_histograms(x, cfg.n_bins);
    let data = Binned::new(x, &edges);
    let n = x.len();
    let mut scores = vec![[0.0; NUM_CLASSES]; n];
    let mut prev_loss = log_loss(&scores, y);
    let mut model = GbdtModel::empty(dim, cfg.clone());
    model.bin_edges = edges.clone();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];

    for _ in 0..cfg.n_rounds {
        let probs: Vec<[f64; NUM_CLASSES]> = scores.iter().map(softmax3).collect();
        let mut round_trees = Vec::with_capacity(NUM_CLASSES);
        let mut deltas: Vec<Vec<f64>> = Vec::with_capacity(NUM_CLASSES);
        for k in 0..NUM_CLASSES {
            for i in 0..n {
                let p = probs[i][k];
                g[i] = p - if y[i].index() == k { 1.0 } else { 0.0 };
                h[i] = p * (1.0 - p);
            }
            let (tree, vals) = grow_tree(&data, &edges, &g, &h, cfg);
            round_trees.push(tree);
            deltas.push(vals);
        }

        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let trial: Vec<[f64; NUM_CLASSES]> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    [
                        s[0] + factor * deltas[0][i],
                        s[1] + factor * deltas[1][i],
                        s[2] + factor * deltas[2][i],
                    ]
                })
                .collect();
            let loss = log_loss(&trial, y);
            if !loss.is_finite() {
                return Err(Error::Diverged);
            }
            if loss <= prev_loss {
                accepted = Some((trial, loss));
                break;
            }
            factor *= 0.5;
        }
        let Some((trial, loss)) = accepted else { break };
        if factor != 1.0 {
            round_trees.iter_mut().for_each(|t| t.scale_leaves(factor));
        }
        scores = trial;
        prev_loss = loss;
        model.trees.extend(round_trees);
        model.training_log.push(loss);
    }
    Ok(model)
}
