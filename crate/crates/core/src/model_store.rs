//! Self-contained model files.
//!
//! A file is an 8-byte magic `SENTIBv1`, a little-endian `u32` format
//! version, a `u32` section count, and then sections of the form
//! `tag: [u8; 4]`, `len: u64`, `payload: [u8; len]`. All numbers are
//! little-endian and fixed width; strings are a `u32` byte length followed by
//! UTF-8. See `docs/model_format.md` for the per-section layout.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bilstm::{BilstmConfig, BilstmModel, BilstmNet, EpochRecord, NeuralVocab};
use crate::error::{Error, Result};
use crate::gbdt::{BinEdges, GbdtConfig, GbdtModel, Node, RegressionTree};
use crate::label::{argmax, Label, NUM_CLASSES};
use crate::linear::{LinearKind, LinearModel};
use crate::text_prep::{CleanDocument, Preprocessor, SlangLexicon, StopwordList};
use crate::tfidf::TfidfModel;

pub const MAGIC: &[u8; 8] = b"SENTIBv1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    SvmLinear,
    Gbdt,
    Bilstm,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Logistic, Family::SvmLinear, Family::Gbdt, Family::Bilstm];
    pub const CLASSICAL: [Family; 3] = [Family::Logistic, Family::SvmLinear, Family::Gbdt];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::SvmLinear => "svm_linear",
            Family::Gbdt => "gbdt",
            Family::Bilstm => "bilstm",
        }
    }

    /// Leaderboard display name.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::Logistic => "Logistic Regression",
            Family::SvmLinear => "SVM - Linear Kernel",
            Family::Gbdt => "Gradient Boosting (histogram)",
            Family::Bilstm => "BiLSTM",
        }
    }

    fn code(self) -> u8 {
        match self {
            Family::Logistic => 0,
            Family::SvmLinear => 1,
            Family::Gbdt => 2,
            Family::Bilstm => 3,
        }
    }

    fn from_code(c: u8) -> Option<Family> {
        Family::ALL.get(c as usize).copied()
    }

    pub fn has_probabilities(self) -> bool {
        self != Family::SvmLinear
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "logistic" | "lr" | "logreg" => Ok(Family::Logistic),
            "svm" | "svm_linear" | "linear_svm" => Ok(Family::SvmLinear),
            "gbdt" | "lightgbm" | "lgbm" => Ok(Family::Gbdt),
            "bilstm" => Ok(Family::Bilstm),
            other => Err(Error::InvalidArgument(format!("unknown model family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Linear { tfidf: TfidfModel, model: LinearModel },
    Gbdt { tfidf: TfidfModel, model: GbdtModel },
    Bilstm(BilstmModel),
}

impl Classifier {
    pub fn family(&self) -> Family {
        match self {
            Classifier::Linear { model, .. } => match model.kind {
                LinearKind::Logistic => Family::Logistic,
                LinearKind::SvmLinear => Family::SvmLinear,
            },
            Classifier::Gbdt { .. } => Family::Gbdt,
            Classifier::Bilstm(_) => Family::Bilstm,
        }
    }

    /// Number of learned numeric parameters (feature weights, leaf values and
    /// thresholds, or network weights).
    pub fn param_count(&self) -> usize {
        match self {
            Classifier::Linear { model, .. } => model.weights.len() + NUM_CLASSES,
            Classifier::Gbdt { model, .. } => model
                .trees
                .iter()
                .map(|t| t.n_leaves() + 2 * t.splits().count())
                .sum(),
            Classifier::Bilstm(m) => m.param_count(),
        }
    }

    /// Per-class scores: probabilities where the family has them, decision
    /// values otherwise.
    pub fn scores(&self, docs: &[CleanDocument]) -> Result<Vec<[f64; NUM_CLASSES]>> {
        match self {
            Classifier::Linear { tfidf, model } => docs
                .iter()
                .map(|d| {
                    let x = tfidf.transform(d);
                    if model.has_probabilities() {
                        model.predict_proba(&x)
                    } else {
                        model.predict_scores(&x)
                    }
                })
                .collect(),
            Classifier::Gbdt { tfidf, model } => Ok(docs.iter().map(|d| model.predict_proba(&tfidf.transform(d))).collect()),
            Classifier::Bilstm(m) => m.predict_proba(docs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub seed: u64,
    /// SHA-256 (hex) of `config`.
    pub config_hash: String,
    /// Hyperparameters as `key = value` lines.
    pub config: String,
    pub label_map: Vec<String>,
}

impl ArtifactMetadata {
    pub fn new(seed: u64, config: String) -> Self {
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        ArtifactMetadata {
            created_at,
            seed,
            config_hash: sha256_hex(config.as_bytes()),
            config,
            label_map: Label::ALL.iter().map(|l| l.as_str().to_string()).collect(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output of one prediction; shared by the CLI and the HTTP endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Present for families with calibrated outputs, and for no-signal input.
    pub probabilities: Option<BTreeMap<Label, f64>>,
    /// Probabilities or raw decision values, per class.
    pub scores: BTreeMap<Label, f64>,
    pub model_family: Family,
    /// True when preprocessing left no tokens; the label is then `neutral`
    /// and the probabilities uniform.
    pub no_signal: bool,
}

fn per_class(v: &[f64; NUM_CLASSES]) -> BTreeMap<Label, f64> {
    Label::ALL.iter().map(|&l| (l, v[l.index()])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub prep: Preprocessor,
    pub classifier: Classifier,
    pub metadata: ArtifactMetadata,
}

impl ModelArtifact {
    pub fn new(prep: Preprocessor, classifier: Classifier, seed: u64, config: String) -> Self {
        ModelArtifact {
            prep,
            classifier,
            metadata: ArtifactMetadata::new(seed, config),
        }
    }

    pub fn family(&self) -> Family {
        self.classifier.family()
    }

    pub fn param_count(&self) -> usize {
        self.classifier.param_count()
    }

    pub fn clean(&self, text: &str) -> CleanDocument {
        self.prep.process(0, text)
    }

    /// Predictions for already-cleaned documents, in input order.
    pub fn predict_docs(&self, docs: &[CleanDocument]) -> Result<Vec<Prediction>> {
        let family = self.family();
        let scores = self.classifier.scores(docs)?;
        Ok(docs
            .iter()
            .zip(scores)
            .map(|(doc, s)| {
                if doc.is_empty() {
                    let u = [1.0 / NUM_CLASSES as f64; NUM_CLASSES];
                    return Prediction {
                        label: Label::Neutral,
                        probabilities: Some(per_class(&u)),
                        scores: per_class(&u),
                        model_family: family,
                        no_signal: true,
                    };
                }
                Prediction {
                    label: Label::from_index(argmax(&s)).expect("three classes"),
                    probabilities: family.has_probabilities().then(|| per_class(&s)),
                    scores: per_class(&s),
                    model_family: family,
                    no_signal: false,
                }
            })
            .collect())
    }

    pub fn predict_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<Prediction>> {
        let docs: Vec<CleanDocument> = texts.iter().map(|t| self.clean(t.as_ref())).collect();
        self.predict_docs(&docs)
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        Ok(self.predict_texts(&[text])?.remove(0))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut sections: Vec<([u8; 4], Vec<u8>)> = Vec::new();

        let mut w = Writer::default();
        w.u8(self.family().code());
        w.str(&serde_json::to_string(&self.metadata)?);
        sections.push((*b"META", w.buf));

        let mut w = Writer::default();
        let entries = self.prep.slang.entries();
        w.u32(entries.len() as u32);
        for (k, v) in entries {
            w.str(k);
            w.str(v);
        }
        let words: Vec<&str> = self.prep.stopwords.words().collect();
        w.u32(words.len() as u32);
        for s in words {
            w.str(s);
        }
        sections.push((*b"PREP", w.buf));

        match &self.classifier {
            Classifier::Linear { tfidf, model } => {
                sections.push((*b"TFID", encode_tfidf(tfidf)));
                sections.push((*b"LINR", encode_linear(model)));
            }
            Classifier::Gbdt { tfidf, model } => {
                sections.push((*b"TFID", encode_tfidf(tfidf)));
                sections.push((*b"GBDT", encode_gbdt(model)?));
            }
            Classifier::Bilstm(m) => {
                sections.push((*b"VOCB", encode_vocab(&m.vocab)));
                sections.push((*b"LSTM", encode_bilstm(m)?));
            }
        }

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (tag, payload) in sections {
            out.extend_from_slice(&tag);
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..6] != b"SENTIB" {
            return Err(Error::NotAModelFile);
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::UnsupportedVersion {
                found: String::from_utf8_lossy(&bytes[6..8]).into_owned(),
                supported: FORMAT_VERSION,
            });
        }
        let mut r = Reader::new("header", &bytes[8..]);
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version.to_string(),
                supported: FORMAT_VERSION,
            });
        }
        let count = r.u32()?;
        let mut sections: BTreeMap<[u8; 4], &[u8]> = BTreeMap::new();
        for _ in 0..count {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            r.section = tag_name(&tag);
            let len = r.u64()? as usize;
            let payload = r.take(len)?;
            sections.insert(tag, payload);
            r.section = "header".into();
        }
        let get = |tag: &[u8; 4]| {
            sections.get(tag).copied().ok_or_else(|| Error::Section {
                section: tag_name(tag),
                msg: "missing".into(),
            })
        };

        let mut r = Reader::new("META", get(b"META")?);
        let family = Family::from_code(r.u8()?).ok_or_else(|| r.err("unknown family code"))?;
        let metadata: ArtifactMetadata = serde_json::from_str(&r.str()?).map_err(|e| r.err(&e.to_string()))?;
        r.finish()?;

        let mut r = Reader::new("PREP", get(b"PREP")?);
        let mut entries = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.str()?;
            entries.insert(k, r.str()?);
        }
        let slang = SlangLexicon::from_entries(entries).map_err(|e| r.err(&e.to_string()))?;
        let mut words = Vec::new();
        for _ in 0..r.u32()? {
            words.push(r.str()?);
        }
        r.finish()?;
        let prep = Preprocessor::new(slang, StopwordList::from_words(words));

        let classifier = match family {
            Family::Logistic | Family::SvmLinear => {
                let tfidf = decode_tfidf(get(b"TFID")?)?;
                let model = decode_linear(get(b"LINR")?)?;
                if model.dim != tfidf.dim() {
                    return Err(Error::Section {
                        section: "LINR".into(),
                        msg: "weight width does not match the TF-IDF vocabulary".into(),
                    });
                }
                Classifier::Linear { tfidf, model }
            }
            Family::Gbdt => Classifier::Gbdt {
                tfidf: decode_tfidf(get(b"TFID")?)?,
                model: decode_gbdt(get(b"GBDT")?)?,
            },
            Family::Bilstm => {
                let vocab = decode_vocab(get(b"VOCB")?)?;
                Classifier::Bilstm(decode_bilstm(get(b"LSTM")?, vocab)?)
            }
        };
        if classifier.family() != family {
            return Err(Error::Section {
                section: "META".into(),
                msg: "family code disagrees with the payload".into(),
            });
        }
        Ok(ModelArtifact {
            prep,
            classifier,
            metadata,
        })
    }
}

/// Writes atomically: the bytes go to a temporary file in the same directory
/// which is then renamed over `path`.
pub fn save(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    let bytes = artifact.to_bytes()?;
    write_atomic(path, &bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelArtifact> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelArtifact::from_bytes(&bytes)
}

fn tag_name(tag: &[u8; 4]) -> String {
    String::from_utf8_lossy(tag).into_owned()
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        vs.iter().for_each(|&v| self.f64(v));
    }
    fn f32s(&mut self, vs: &[f32]) {
        self.u64(vs.len() as u64);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    section: String,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(section: &str, buf: &'a [u8]) -> Self {
        Reader {
            section: section.to_string(),
            buf,
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Section {
            section: self.section.clone(),
            msg: msg.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(&format!("truncated: needed {n} bytes at offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem).is_none_or(|b| b > self.buf.len() - self.pos) {
            return Err(self.err(&format!("truncated: array of {n} elements")));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.len(4)?;
        let raw = self.take(4 * n)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err("invalid UTF-8"))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }
}

fn encode_tfidf(m: &TfidfModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(m.max_features as u64);
    w.u64(m.n_docs_fit as u64);
    w.u32(m.terms().len() as u32);
    for t in m.terms() {
        w.str(t);
    }
    w.f64s(m.idf());
    w.buf
}

fn decode_tfidf(buf: &[u8]) -> Result<TfidfModel> {
    let mut r = Reader::new("TFID", buf);
    let max_features = r.u64()? as usize;
    let n_docs = r.u64()? as usize;
    let n = r.u32()? as usize;
    let terms = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    let idf = r.f64s()?;
    r.finish()?;
    if idf.len() != terms.len() {
        return Err(r.err("idf length differs from vocabulary size"));
    }
    Ok(TfidfModel::from_parts(terms, idf, max_features, n_docs))
}

fn encode_linear(m: &LinearModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(match m.kind {
        LinearKind::Logistic => 0,
        LinearKind::SvmLinear => 1,
    });
    w.u64(m.dim as u64);
    w.f64(m.l2);
    w.u64(m.steps);
    m.bias.iter().for_each(|&b| w.f64(b));
    w.f64s(&m.weights);
    w.f64s(&m.training_log);
    w.buf
}

fn decode_linear(buf: &[u8]) -> Result<LinearModel> {
    let mut r = Reader::new("LINR", buf);
    let kind = match r.u8()? {
        0 => LinearKind::Logistic,
        1 => LinearKind::SvmLinear,
        _ => return Err(r.err("unknown linear kind")),
    };
    let dim = r.u64()? as usize;
    let l2 = r.f64()?;
    let steps = r.u64()?;
    let mut bias = [0.0; NUM_CLASSES];
    for b in &mut bias {
        *b = r.f64()?;
    }
    let weights = r.f64s()?;
    let training_log = r.f64s()?;
    r.finish()?;
    if weights.len() != NUM_CLASSES * dim {
        return Err(r.err("weight matrix has the wrong size"));
    }
    Ok(LinearModel {
        kind,
        dim,
        weights,
        bias,
        l2,
        training_log,
        steps,
    })
}

fn encode_gbdt(m: &GbdtModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.str(&serde_json::to_string(&m.config)?);
    w.u64(m.dim as u64);
    w.u64(m.bin_edges.edges.len() as u64);
    for (edges, &nz) in m.bin_edges.edges.iter().zip(&m.bin_edges.has_nonzero) {
        w.u8(nz as u8);
        w.f64s(edges);
    }
    w.u64(m.trees.len() as u64);
    for tree in &m.trees {
        w.u32(tree.nodes.len() as u32);
        for node in &tree.nodes {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    zero_left,
                    gain,
                    left,
                    right,
                } => {
                    w.u8(0);
                    w.u32(*feature as u32);
                    w.f64(*threshold);
                    w.u8(*zero_left as u8);
                    w.f64(*gain);
                    w.u32(*left as u32);
                    w.u32(*right as u32);
                }
                Node::Leaf { value, samples } => {
                    w.u8(1);
                    w.f64(*value);
                    w.u64(*samples as u64);
                }
            }
        }
    }
    w.f64s(&m.training_log);
    Ok(w.buf)
}

fn decode_gbdt(buf: &[u8]) -> Result<GbdtModel> {
    let mut r = Reader::new("GBDT", buf);
    let config: GbdtConfig = serde_json::from_str(&r.str()?).map_err(|e| r.err(&e.to_string()))?;
    let dim = r.u64()? as usize;
    let nf = r.len(9)?;
    let mut edges = Vec::with_capacity(nf);
    let mut has_nonzero = Vec::with_capacity(nf);
    for _ in 0..nf {
        has_nonzero.push(r.u8()? != 0);
        edges.push(r.f64s()?);
    }
    let nt = r.len(4)?;
    let mut trees = Vec::with_capacity(nt);
    for _ in 0..nt {
        let nn = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(nn.min(1 << 16));
        for _ in 0..nn {
            let node = match r.u8()? {
                0 => Node::Split {
                    feature: r.u32()? as usize,
                    threshold: r.f64()?,
                    zero_left: r.u8()? != 0,
                    gain: r.f64()?,
                    left: r.u32()? as usize,
                    right: r.u32()? as usize,
                },
                1 => Node::Leaf {
                    value: r.f64()?,
                    samples: r.u64()? as usize,
                },
                _ => return Err(r.err("unknown node tag")),
            };
            nodes.push(node);
        }
        for n in &nodes {
            if let Node::Split { left, right, feature, .. } = n {
                if *left >= nn || *right >= nn || *feature >= dim {
                    return Err(r.err("node index out of range"));
                }
            }
        }
        trees.push(RegressionTree { nodes });
    }
    let training_log = r.f64s()?;
    r.finish()?;
    Ok(GbdtModel {
        dim,
        trees,
        bin_edges: BinEdges { edges, has_nonzero },
        config,
        training_log,
    })
}

fn encode_vocab(v: &NeuralVocab) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(v.len() as u32);
    for t in v.tokens() {
        w.str(t);
    }
    w.buf
}

fn decode_vocab(buf: &[u8]) -> Result<NeuralVocab> {
    let mut r = Reader::new("VOCB", buf);
    let n = r.u32()? as usize;
    let tokens = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    if tokens.len() < 2 {
        return Err(r.err("vocabulary lacks the reserved ids"));
    }
    Ok(NeuralVocab::from_tokens(tokens))
}

fn encode_bilstm(m: &BilstmModel) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.str(&serde_json::to_string(&m.config)?);
    w.str(&serde_json::to_string(&m.curves)?);
    w.u64(m.best_epoch as u64);
    w.f32s(&m.net.params);
    Ok(w.buf)
}

fn decode_bilstm(buf: &[u8], vocab: NeuralVocab) -> Result<BilstmModel> {
    let mut r = Reader::new("LSTM", buf);
    let config: BilstmConfig = serde_json::from_str(&r.str()?).map_err(|e| r.err(&e.to_string()))?;
    let curves: Vec<EpochRecord> = serde_json::from_str(&r.str()?).map_err(|e| r.err(&e.to_string()))?;
    let best_epoch = r.u64()? as usize;
    let params = r.f32s()?;
    r.finish()?;
    let mut net = BilstmNet::<f32>::zeros(config.dims(vocab.len()));
    if params.len() != net.params.len() {
        return Err(r.err(&format!(
            "expected {} parameters, found {}",
            net.params.len(),
            params.len()
        )));
    }
    net.params = params;
    Ok(BilstmModel {
        config,
        vocab,
        net,
        curves,
        best_epoch,
    })
}
