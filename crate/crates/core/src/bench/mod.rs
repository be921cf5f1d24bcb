//! Experiment orchestration: cross-validated benchmarking of the classical
//! families, hyperparameter search, BiLSTM training on the held-out split,
//! evaluation and prediction. Each `cmd_*` function writes its outputs under
//! a run directory and is what the command-line tool calls.

pub mod config;
pub mod plots;
pub mod synth;
pub mod tune;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bilstm::{self, BilstmModel};
use crate::corpus::{self, CorpusFormat, CorpusSchema, DatasetSplit, FoldPlan, LabeledExample};
use crate::error::{Error, Result};
use crate::gbdt;
use crate::label::{argmax, Label};
use crate::linear::{self, LogisticConfig, SvmConfig};
use crate::math::{mean, std_dev};
use crate::metrics::{self, fmt_auc, EvalReport};
use crate::model_store::{self, Classifier, Family, ModelArtifact, Prediction};
use crate::rng::derive_seed;
use crate::text_prep::{CleanDocument, Preprocessor, SlangLexicon, StopwordList};
use crate::tfidf::TfidfModel;

pub use config::RunConfig;

/// Parameter budget the BiLSTM must stay under.
pub const MAX_BILSTM_PARAMS: usize = 10_000_000;

pub fn build_preprocessor(cfg: &RunConfig) -> Result<Preprocessor> {
    let slang = match &cfg.slang_path {
        Some(p) => SlangLexicon::load(p)?,
        None => SlangLexicon::bundled(),
    };
    let stopwords = match &cfg.stopwords_path {
        Some(p) => StopwordList::load(p)?,
        None => StopwordList::bundled(),
    };
    Ok(Preprocessor::new(slang, stopwords))
}

pub fn load_corpus(path: &Path, cfg: &RunConfig) -> Result<Vec<LabeledExample>> {
    let schema = CorpusSchema {
        text_field: cfg.text_field.clone(),
        label_field: cfg.label_field.clone(),
    };
    corpus::load_corpus_with(path, CorpusFormat::from_path(path), &schema)
}

pub fn preprocess_corpus(prep: &Preprocessor, corpus: &[LabeledExample]) -> Vec<CleanDocument> {
    corpus.par_iter().map(|ex| prep.process(ex.id, &ex.text)).collect()
}

fn pick<T: Clone>(xs: &[T], ids: &[usize]) -> Vec<T> {
    ids.iter().map(|&i| xs[i].clone()).collect()
}

/// Fits TF-IDF on `docs` and then one classical model; `seed` drives the
/// model's own randomness.
pub fn fit_classical(family: Family, docs: &[CleanDocument], y: &[Label], cfg: &RunConfig, seed: u64) -> Result<Classifier> {
    let run = || -> Result<Classifier> {
        let tfidf = TfidfModel::fit(docs, cfg.tfidf_max_features)?;
        let x = tfidf.transform_all(docs);
        Ok(match family {
            Family::Logistic => {
                let c = LogisticConfig { seed, ..cfg.logistic };
                Classifier::Linear {
                    model: linear::fit_logistic(&x, y, &c)?,
                    tfidf,
                }
            }
            Family::SvmLinear => {
                let c = SvmConfig { seed, ..cfg.svm };
                Classifier::Linear {
                    model: linear::fit_svm(&x, y, &c)?,
                    tfidf,
                }
            }
            Family::Gbdt => {
                let c = gbdt::GbdtConfig { seed, ..cfg.gbdt.clone() };
                Classifier::Gbdt {
                    model: gbdt::fit(&x, y, &c)?,
                    tfidf,
                }
            }
            Family::Bilstm => {
                return Err(Error::InvalidArgument(
                    "the BiLSTM is trained on the train/validation split, not through cross-validation".into(),
                ))
            }
        })
    };
    run().map_err(|e| e.context(family.as_str()))
}

/// Scores, predictions and report of `clf` on `docs`.
pub fn evaluate_classifier(clf: &Classifier, docs: &[CleanDocument], y: &[Label]) -> Result<EvalReport> {
    let scores = clf.scores(docs)?;
    let preds: Vec<Label> = scores
        .iter()
        .map(|s| Label::from_index(argmax(s)).expect("three classes"))
        .collect();
    let probs = clf.family().has_probabilities().then_some(scores.as_slice());
    metrics::evaluate(y, &preds, probs)
}

/// Per-fold reports for one family. Fold `f` trains with seed
/// `derive_seed(cfg.seed, f)`, so parallel and serial runs agree exactly.
/// `wall_time_s` of each report is its training time.
pub fn cross_validate(
    family: Family,
    docs: &[CleanDocument],
    labels: &[Label],
    plan: &FoldPlan,
    cfg: &RunConfig,
    parallel: bool,
) -> Result<Vec<EvalReport>> {
    let run_fold = |fold: usize| -> Result<EvalReport> {
        let (train, held) = plan.train_val(fold);
        let t0 = Instant::now();
        let clf = fit_classical(family, &pick(docs, &train), &pick(labels, &train), cfg, derive_seed(cfg.seed, fold as u64))?;
        let fit_time = t0.elapsed().as_secs_f64();
        let mut rep = evaluate_classifier(&clf, &pick(docs, &held), &pick(labels, &held))?;
        rep.wall_time_s = fit_time;
        Ok(rep)
    };
    if parallel {
        (0..plan.k).into_par_iter().map(run_fold).collect()
    } else {
        (0..plan.k).map(run_fold).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub kappa: f64,
    pub macro_f1: f64,
}

/// Mean and population standard deviation over folds. Recall, precision
/// and F1 are support-weighted; AUC is averaged over the folds that have it.
pub fn summarize(reports: &[EvalReport]) -> (MetricSummary, MetricSummary) {
    let col = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let aucs: Vec<f64> = reports.iter().filter_map(|r| r.auc_macro).collect();
    let (auc_m, auc_s) = if aucs.is_empty() {
        (None, None)
    } else {
        (Some(mean(&aucs)), Some(std_dev(&aucs)))
    };
    let fields: [Vec<f64>; 6] = [
        col(&|r| r.accuracy),
        col(&|r| r.weighted_recall),
        col(&|r| r.weighted_precision),
        col(&|r| r.weighted_f1),
        col(&|r| r.kappa),
        col(&|r| r.macro_f1),
    ];
    let build = |f: fn(&[f64]) -> f64, auc| MetricSummary {
        accuracy: f(&fields[0]),
        auc,
        recall: f(&fields[1]),
        precision: f(&fields[2]),
        f1: f(&fields[3]),
        kappa: f(&fields[4]),
        macro_f1: f(&fields[5]),
    };
    (build(mean, auc_m), build(std_dev, auc_s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardRow {
    pub family: Family,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    /// Mean per-fold training time.
    pub tt_sec: f64,
    /// Whole cross-validation wall time for the family.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRun {
    pub seed: u64,
    pub cv_k: usize,
    pub tuned: bool,
    pub rows: Vec<LeaderboardRow>,
}

pub const LEADERBOARD_COLUMNS: [&str; 8] = ["Model", "Accuracy", "AUC", "Recall", "Prec.", "F1", "Kappa", "TT (Sec)"];

pub fn benchmark(
    families: &[Family],
    docs: &[CleanDocument],
    labels: &[Label],
    cfg: &RunConfig,
    tuned: bool,
) -> Result<BenchmarkRun> {
    cfg.validate()?;
    if families.is_empty() {
        return Err(Error::InvalidArgument("no model families to benchmark".into()));
    }
    let ids: Vec<usize> = (0..docs.len()).collect();
    let plan = corpus::make_folds(&ids, labels, cfg.cv_k, cfg.seed)?;
    let mut rows = Vec::new();
    for &family in families {
        let t0 = Instant::now();
        let reports = cross_validate(family, docs, labels, &plan, cfg, cfg.parallel_folds)?;
        let wall = t0.elapsed().as_secs_f64();
        let (m, s) = summarize(&reports);
        let fit_times: Vec<f64> = reports.iter().map(|r| r.wall_time_s).collect();
        rows.push(LeaderboardRow {
            family,
            mean: m,
            std: s,
            tt_sec: mean(&fit_times),
            wall_time_s: wall,
        });
    }
    rows.sort_by(|a, b| b.mean.accuracy.total_cmp(&a.mean.accuracy));
    Ok(BenchmarkRun {
        seed: cfg.seed,
        cv_k: cfg.cv_k,
        tuned,
        rows,
    })
}

fn metric_cells(m: &MetricSummary) -> [String; 6] {
    [
        format!("{:.4}", m.accuracy),
        fmt_auc(m.auc, 4),
        format!("{:.4}", m.recall),
        format!("{:.4}", m.precision),
        format!("{:.4}", m.f1),
        format!("{:.4}", m.kappa),
    ]
}

/// Aligned text table. With `with_time = false` the timing column is left
/// out, which gives a run-to-run stable rendering.
pub fn render_leaderboard(run: &BenchmarkRun, with_time: bool) -> String {
    let ncol = if with_time { 8 } else { 7 };
    let mut rows: Vec<Vec<String>> = vec![LEADERBOARD_COLUMNS[..ncol].iter().map(|s| s.to_string()).collect()];
    for r in &run.rows {
        let mut cells = vec![r.family.display_name().to_string()];
        cells.extend(metric_cells(&r.mean));
        if with_time {
            cells.push(format!("{:.3}", r.tt_sec));
        }
        rows.push(cells);
    }
    let widths: Vec<usize> = (0..ncol).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(s, "{}", line.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(s, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (ncol - 1)));
        }
    }
    let _ = writeln!(
        s,
        "\n{}-fold stratified CV, seed {}{}; Recall/Prec./F1 are support-weighted",
        run.cv_k,
        run.seed,
        if run.tuned { ", tuned" } else { "" }
    );
    s
}

pub fn leaderboard_csv(run: &BenchmarkRun, with_time: bool) -> String {
    let ncol = if with_time { 8 } else { 7 };
    let mut s = LEADERBOARD_COLUMNS[..ncol].join(",");
    s.push('\n');
    for r in &run.rows {
        let mut cells = vec![r.family.display_name().to_string()];
        cells.extend(metric_cells(&r.mean));
        if with_time {
            cells.push(format!("{:.3}", r.tt_sec));
        }
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

/// Standard deviation over folds for each metric column.
pub fn leaderboard_std_csv(run: &BenchmarkRun) -> String {
    let mut s = LEADERBOARD_COLUMNS[..7].join(",");
    s.push('\n');
    for r in &run.rows {
        let mut cells = vec![r.family.display_name().to_string()];
        cells.extend(metric_cells(&r.std));
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `runs/<unix-seconds>-seed<seed>`.
pub fn default_run_dir(seed: u64) -> PathBuf {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    PathBuf::from("runs").join(format!("{secs}-seed{seed}"))
}

/// Corpus plus everything derived from it once per command.
pub struct Prepared {
    pub corpus: Vec<LabeledExample>,
    pub docs: Vec<CleanDocument>,
    pub labels: Vec<Label>,
    pub prep: Preprocessor,
    pub split: DatasetSplit,
}

pub fn prepare(corpus: Vec<LabeledExample>, cfg: &RunConfig) -> Result<Prepared> {
    let prep = build_preprocessor(cfg)?;
    let docs = preprocess_corpus(&prep, &corpus);
    let labels = corpus.iter().map(|e| e.label).collect();
    let split = corpus::stratified_split(&corpus, cfg.split_ratios, cfg.seed)?;
    Ok(Prepared {
        corpus,
        docs,
        labels,
        prep,
        split,
    })
}

impl Prepared {
    /// Positions (not ids) of a split part; ids equal positions for loaded corpora.
    fn part(&self, ids: &[usize]) -> (Vec<CleanDocument>, Vec<Label>) {
        let pos: std::collections::HashMap<usize, usize> =
            self.corpus.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        let idx: Vec<usize> = ids.iter().map(|id| pos[id]).collect();
        (pick(&self.docs, &idx), pick(&self.labels, &idx))
    }

    pub fn train(&self) -> (Vec<CleanDocument>, Vec<Label>) {
        self.part(&self.split.train)
    }

    pub fn validation(&self) -> (Vec<CleanDocument>, Vec<Label>) {
        self.part(&self.split.validation)
    }

    pub fn test(&self) -> (Vec<CleanDocument>, Vec<Label>) {
        self.part(&self.split.test)
    }
}

#[derive(Serialize)]
struct CleanRow<'a> {
    id: usize,
    label: Label,
    tokens: &'a [String],
}

/// Writes `clean.jsonl` (one `{id, label, tokens}` object per example).
pub fn cmd_prep(p: &Prepared, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let mut s = String::new();
    for (doc, label) in p.docs.iter().zip(&p.labels) {
        s.push_str(&serde_json::to_string(&CleanRow {
            id: doc.original_id,
            label: *label,
            tokens: &doc.tokens,
        })?);
        s.push('\n');
    }
    let path = out.join("clean.jsonl");
    write(&path, s)?;
    Ok(path)
}

/// Writes `split.json` and `folds.json` (folds over the training part).
pub fn cmd_split(p: &Prepared, cfg: &RunConfig, out: &Path) -> Result<(DatasetSplit, FoldPlan)> {
    ensure_dir(out)?;
    let (_, train_y) = p.train();
    let plan = corpus::make_folds(&p.split.train, &train_y, cfg.cv_k, cfg.seed)?;
    write(&out.join("split.json"), p.split.to_json()?)?;
    write(&out.join("folds.json"), plan.to_json()?)?;
    Ok((p.split.clone(), plan))
}

/// Cross-validates the requested families on the training part and writes
/// `leaderboard.txt`, `leaderboard.csv` (with timing), `leaderboard_metrics.csv`
/// (without timing) and `leaderboard_std.csv`.
pub fn cmd_benchmark(p: &Prepared, families: &[Family], cfg: &RunConfig, tuned: bool, out: &Path) -> Result<BenchmarkRun> {
    ensure_dir(out)?;
    let (docs, labels) = p.train();
    let run = benchmark(families, &docs, &labels, cfg, tuned)?;
    write(&out.join("leaderboard.txt"), render_leaderboard(&run, true))?;
    write(&out.join("leaderboard.csv"), leaderboard_csv(&run, true))?;
    write(&out.join("leaderboard_metrics.csv"), leaderboard_csv(&run, false))?;
    write(&out.join("leaderboard_std.csv"), leaderboard_std_csv(&run))?;
    Ok(run)
}

fn write_report(report: &EvalReport, out: &Path, plots: bool) -> Result<()> {
    write(&out.join("report.txt"), metrics::render_classification_report(report))?;
    write(&out.join("report.csv"), metrics::classification_report_csv(report))?;
    write(&out.join("confusion.csv"), report.confusion.to_csv())?;
    if plots {
        plots::confusion_png(&report.confusion, &out.join("confusion.png"))?;
    }
    Ok(())
}

pub struct TrainOutcome {
    pub artifact: ModelArtifact,
    pub report: EvalReport,
    pub model_path: PathBuf,
}

/// Fits a classical family on the training part, evaluates it on the test
/// part, and writes `model.sentib` plus the report files.
pub fn cmd_train(p: &Prepared, family: Family, cfg: &RunConfig, out: &Path) -> Result<TrainOutcome> {
    if family == Family::Bilstm {
        let o = cmd_train_dl(p, cfg, out, &mut |_| {})?;
        return Ok(TrainOutcome {
            artifact: o.artifact,
            report: o.report,
            model_path: o.model_path,
        });
    }
    cfg.validate()?;
    ensure_dir(out)?;
    let (docs, y) = p.train();
    let t0 = Instant::now();
    let clf = fit_classical(family, &docs, &y, cfg, cfg.seed)?;
    let fit_time = t0.elapsed().as_secs_f64();
    let (tdocs, ty) = p.test();
    let mut report = evaluate_classifier(&clf, &tdocs, &ty)?;
    report.wall_time_s = fit_time;
    let artifact = ModelArtifact::new(p.prep.clone(), clf, cfg.seed, cfg.family_text(family));
    let model_path = out.join("model.sentib");
    model_store::save(&artifact, &model_path)?;
    write_report(&report, out, cfg.plots)?;
    Ok(TrainOutcome {
        artifact,
        report,
        model_path,
    })
}

pub struct TrainDlOutcome {
    pub artifact: ModelArtifact,
    pub report: EvalReport,
    pub param_count: usize,
    pub model_path: PathBuf,
}

/// Trains the BiLSTM on the training part with early stopping on the
/// validation part, evaluates on the test part, and writes `model.sentib`,
/// `curves.csv` and the report files. `log` receives progress lines.
pub fn cmd_train_dl(p: &Prepared, cfg: &RunConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<TrainDlOutcome> {
    cfg.validate()?;
    ensure_dir(out)?;
    let (train, ty) = p.train();
    let (val, vy) = p.validation();
    let (test, sy) = p.test();
    let bcfg = bilstm::BilstmConfig {
        seed: cfg.seed,
        ..cfg.bilstm
    };

    let vocab = bilstm::NeuralVocab::build(&train, bcfg.vocab_size)?;
    let params = bilstm::param_count(vocab.len(), &bcfg);
    log(&format!(
        "bilstm: vocabulary {} ids, {} trainable parameters (limit {})",
        vocab.len(),
        params,
        MAX_BILSTM_PARAMS
    ));
    if params >= MAX_BILSTM_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "parameter count {params} is not below {MAX_BILSTM_PARAMS}"
        )));
    }

    let t0 = Instant::now();
    let model = BilstmModel::train_with(&train, &ty, &val, &vy, &bcfg, |r| {
        log(&format!(
            "epoch {:>2}  train_loss {:.4}  train_acc {:.4}  val_loss {:.4}  val_acc {:.4}  val_macro_f1 {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.val_macro_f1
        ))
    })
    .map_err(|e| e.context("bilstm"))?;
    let fit_time = t0.elapsed().as_secs_f64();
    assert_eq!(model.param_count(), params);

    let probs = model.predict_proba(&test)?;
    let preds: Vec<Label> = probs.iter().map(|s| Label::from_index(argmax(s)).expect("three classes")).collect();
    let mut report = metrics::evaluate(&sy, &preds, Some(&probs))?;
    report.wall_time_s = fit_time;

    write(&out.join("curves.csv"), bilstm::curves_csv(&model.curves))?;
    if cfg.plots {
        plots::curves_png(&model.curves, &out.join("curves.png"))?;
    }
    let artifact = ModelArtifact::new(
        p.prep.clone(),
        Classifier::Bilstm(model),
        cfg.seed,
        cfg.family_text(Family::Bilstm),
    );
    let model_path = out.join("model.sentib");
    model_store::save(&artifact, &model_path)?;
    write_report(&report, out, cfg.plots)?;
    log(&format!(
        "bilstm: test accuracy {:.4}, macro-F1 {:.4}, trained in {:.1}s",
        report.accuracy, report.macro_f1, fit_time
    ));
    Ok(TrainDlOutcome {
        artifact,
        report,
        param_count: params,
        model_path,
    })
}

/// Evaluates a saved model on `corpus` (the whole file) and writes the report files.
pub fn cmd_evaluate(artifact: &ModelArtifact, corpus: &[LabeledExample], out: &Path, plots: bool) -> Result<EvalReport> {
    ensure_dir(out)?;
    let docs: Vec<CleanDocument> = preprocess_corpus(&artifact.prep, corpus);
    let y: Vec<Label> = corpus.iter().map(|e| e.label).collect();
    let report = evaluate_classifier(&artifact.classifier, &docs, &y)?;
    write_report(&report, out, plots)?;
    Ok(report)
}

/// One JSON object per input text, in input order.
pub fn predict_json_lines<S: AsRef<str>>(artifact: &ModelArtifact, texts: &[S]) -> Result<Vec<String>> {
    artifact
        .predict_texts(texts)?
        .iter()
        .map(|p: &Prediction| Ok(serde_json::to_string(p)?))
        .collect()
}
