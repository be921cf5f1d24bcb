//! Flat `key = value` run configuration.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; keys are dotted lowercase names; lists are
//! comma-separated. Unknown keys are errors. `tune.<family>.<param>` lines
//! declare a search grid over the matching `<family>.<param>` key; the first
//! such line for a family replaces that family's built-in grid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bilstm::BilstmConfig;
use crate::error::{Error, Result};
use crate::gbdt::GbdtConfig;
use crate::linear::{LogisticConfig, SvmConfig};
use crate::model_store::Family;

pub type Grid = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub text_field: String,
    pub label_field: String,
    pub slang_path: Option<PathBuf>,
    pub stopwords_path: Option<PathBuf>,
    pub split_ratios: [f64; 3],
    pub tfidf_max_features: usize,
    pub cv_k: usize,
    pub parallel_folds: bool,
    pub plots: bool,
    pub logistic: LogisticConfig,
    pub svm: SvmConfig,
    pub gbdt: GbdtConfig,
    pub bilstm: BilstmConfig,
    pub tune_budget: usize,
    pub tune_grids: BTreeMap<Family, Grid>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            text_field: "comment".into(),
            label_field: "sentiment".into(),
            slang_path: None,
            stopwords_path: None,
            split_ratios: [0.8, 0.1, 0.1],
            tfidf_max_features: 5000,
            cv_k: 10,
            parallel_folds: true,
            plots: true,
            logistic: LogisticConfig::default(),
            svm: SvmConfig::default(),
            gbdt: GbdtConfig::default(),
            bilstm: BilstmConfig::default(),
            tune_budget: 20,
            tune_grids: default_grids(),
        }
    }
}

fn grid(pairs: &[(&str, &str)]) -> Grid {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), split_list(v)))
        .collect()
}

/// Search grids centred on the module defaults.
pub fn default_grids() -> BTreeMap<Family, Grid> {
    BTreeMap::from([
        (Family::Logistic, grid(&[("lr", "0.01,0.05,0.1,0.5"), ("l2", "1e-5,1e-4,1e-3")])),
        (Family::SvmLinear, grid(&[("l2", "1e-5,1e-4,1e-3"), ("epochs", "50,100")])),
        (
            Family::Gbdt,
            grid(&[
                ("learning_rate", "0.05,0.1,0.2"),
                ("max_leaves", "15,31"),
                ("max_depth", "none,4,8"),
            ]),
        ),
    ])
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            pairs.push((i + 1, k.trim(), v.trim()));
        }
        let mut regridded = BTreeSet::new();
        for (line, k, v) in pairs {
            cfg.set_scoped(k, v, &mut regridded)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        Ok(cfg)
    }

    /// Applies `key = value` overrides in order, with the same grid
    /// replacement rule as a config file.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let mut regridded = BTreeSet::new();
        for (k, v) in pairs {
            self.set_scoped(k.trim(), v.trim(), &mut regridded)?;
        }
        Ok(())
    }

    fn set_scoped(&mut self, key: &str, v: &str, regridded: &mut BTreeSet<Family>) -> Result<()> {
        if let Some((fam, _)) = key.strip_prefix("tune.").and_then(|r| r.split_once('.')) {
            let family: Family = fam.parse()?;
            if regridded.insert(family) {
                self.clear_grid(family);
            }
        }
        self.set(key, v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = num(key, v)?,
            "corpus.text_field" => self.text_field = v.to_string(),
            "corpus.label_field" => self.label_field = v.to_string(),
            "prep.slang" => self.slang_path = Some(PathBuf::from(v)),
            "prep.stopwords" => self.stopwords_path = Some(PathBuf::from(v)),
            "split.ratios" => {
                let parts = split_list(v);
                if parts.len() != 3 {
                    return Err(Error::Config(format!("`{key}`: expected three comma-separated ratios")));
                }
                for (slot, p) in self.split_ratios.iter_mut().zip(&parts) {
                    *slot = num(key, p)?;
                }
            }
            "tfidf.max_features" => self.tfidf_max_features = num(key, v)?,
            "cv.k" => self.cv_k = num(key, v)?,
            "cv.parallel" => self.parallel_folds = boolean(key, v)?,
            "output.plots" => self.plots = boolean(key, v)?,
            "logistic.lr" => self.logistic.lr = num(key, v)?,
            "logistic.l2" => self.logistic.l2 = num(key, v)?,
            "logistic.epochs" => self.logistic.epochs = num(key, v)?,
            "logistic.batch" => self.logistic.batch = num(key, v)?,
            "svm.l2" | "svm_linear.l2" => self.svm.l2 = num(key, v)?,
            "svm.epochs" | "svm_linear.epochs" => self.svm.epochs = num(key, v)?,
            "gbdt.n_rounds" => self.gbdt.n_rounds = num(key, v)?,
            "gbdt.learning_rate" => self.gbdt.learning_rate = num(key, v)?,
            "gbdt.max_leaves" => self.gbdt.max_leaves = num(key, v)?,
            "gbdt.min_samples_leaf" => self.gbdt.min_samples_leaf = num(key, v)?,
            "gbdt.n_bins" => self.gbdt.n_bins = num(key, v)?,
            "gbdt.l2_leaf" => self.gbdt.l2_leaf = num(key, v)?,
            "gbdt.max_depth" => {
                self.gbdt.max_depth = match v.to_ascii_lowercase().as_str() {
                    "none" | "" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "bilstm.vocab_size" => self.bilstm.vocab_size = num(key, v)?,
            "bilstm.seq_len" => self.bilstm.seq_len = num(key, v)?,
            "bilstm.emb_dim" => self.bilstm.emb_dim = num(key, v)?,
            "bilstm.hidden" => self.bilstm.hidden = num(key, v)?,
            "bilstm.dense" => self.bilstm.dense = num(key, v)?,
            "bilstm.dropout" => self.bilstm.dropout = num(key, v)?,
            "bilstm.batch" => self.bilstm.batch = num(key, v)?,
            "bilstm.epochs" => self.bilstm.epochs = num(key, v)?,
            "bilstm.lr" => self.bilstm.lr = num(key, v)?,
            "bilstm.beta1" => self.bilstm.beta1 = num(key, v)?,
            "bilstm.beta2" => self.bilstm.beta2 = num(key, v)?,
            "bilstm.eps" => self.bilstm.eps = num(key, v)?,
            "bilstm.patience" => self.bilstm.patience = num(key, v)?,
            "bilstm.clip_norm" => self.bilstm.clip_norm = num(key, v)?,
            "tune.budget" => self.tune_budget = num(key, v)?,
            _ if key.starts_with("tune.") => {
                let rest = &key["tune.".len()..];
                let (fam, param) = rest
                    .split_once('.')
                    .ok_or_else(|| Error::Config(format!("`{key}`: expected tune.<family>.<param>")))?;
                let family: Family = fam.parse()?;
                let values = split_list(v);
                if values.is_empty() {
                    return Err(Error::Config(format!("`{key}`: empty grid")));
                }
                let mut scratch = self.clone();
                for value in &values {
                    scratch.set(&format!("{}.{param}", family_prefix(family)), value)?;
                }
                let g = self.tune_grids.entry(family).or_default();
                g.insert(param.to_string(), values);
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Drops the built-in grid for `family` (so a config file can replace it).
    pub fn clear_grid(&mut self, family: Family) {
        self.tune_grids.remove(&family);
    }

    /// The `key = value` lines for one family's hyperparameters, in a fixed
    /// order; used for hashing and for echoing configs.
    pub fn family_kv(&self, family: Family) -> Vec<(String, String)> {
        let p = family_prefix(family);
        let kv: Vec<(&str, String)> = match family {
            Family::Logistic => vec![
                ("lr", fmt_f(self.logistic.lr)),
                ("l2", fmt_f(self.logistic.l2)),
                ("epochs", self.logistic.epochs.to_string()),
                ("batch", self.logistic.batch.to_string()),
            ],
            Family::SvmLinear => vec![("l2", fmt_f(self.svm.l2)), ("epochs", self.svm.epochs.to_string())],
            Family::Gbdt => vec![
                ("n_rounds", self.gbdt.n_rounds.to_string()),
                ("learning_rate", fmt_f(self.gbdt.learning_rate)),
                ("max_leaves", self.gbdt.max_leaves.to_string()),
                ("min_samples_leaf", self.gbdt.min_samples_leaf.to_string()),
                ("n_bins", self.gbdt.n_bins.to_string()),
                ("l2_leaf", fmt_f(self.gbdt.l2_leaf)),
                ("max_depth", self.gbdt.max_depth.map_or("none".to_string(), |d| d.to_string())),
            ],
            Family::Bilstm => {
                let b = &self.bilstm;
                vec![
                    ("vocab_size", b.vocab_size.to_string()),
                    ("seq_len", b.seq_len.to_string()),
                    ("emb_dim", b.emb_dim.to_string()),
                    ("hidden", b.hidden.to_string()),
                    ("dense", b.dense.to_string()),
                    ("dropout", fmt_f(b.dropout)),
                    ("batch", b.batch.to_string()),
                    ("epochs", b.epochs.to_string()),
                    ("lr", fmt_f(b.lr)),
                    ("beta1", fmt_f(b.beta1)),
                    ("beta2", fmt_f(b.beta2)),
                    ("eps", fmt_f(b.eps)),
                    ("patience", b.patience.to_string()),
                    ("clip_norm", fmt_f(b.clip_norm)),
                ]
            }
        };
        let mut out: Vec<(String, String)> = kv.into_iter().map(|(k, v)| (format!("{p}.{k}"), v)).collect();
        if family != Family::Bilstm {
            out.push(("tfidf.max_features".into(), self.tfidf_max_features.to_string()));
        }
        out
    }

    pub fn family_text(&self, family: Family) -> String {
        let mut s = String::new();
        for (k, v) in self.family_kv(family) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv_k < 2 {
            return Err(Error::Config("cv.k must be >= 2".into()));
        }
        if self.tfidf_max_features == 0 {
            return Err(Error::Config("tfidf.max_features must be >= 1".into()));
        }
        if self.tune_budget == 0 {
            return Err(Error::Config("tune.budget must be >= 1".into()));
        }
        self.gbdt.validate()?;
        self.bilstm.validate()?;
        Ok(())
    }
}

pub fn family_prefix(family: Family) -> &'static str {
    match family {
        Family::Logistic => "logistic",
        Family::SvmLinear => "svm",
        Family::Gbdt => "gbdt",
        Family::Bilstm => "bilstm",
    }
}
