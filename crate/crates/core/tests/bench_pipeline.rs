mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use sentibench::bench::tune::{self, grid_points};
use sentibench::bench::{self, prepare, RunConfig};
use sentibench::corpus;
use sentibench::model_store::{Classifier, Family};
use sentibench::Label;

fn quick_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig {
        seed,
        cv_k: 5,
        plots: false,
        ..RunConfig::default()
    };
    cfg.gbdt.n_rounds = 30;
    cfg
}

fn small_bilstm(cfg: &mut RunConfig) {
    cfg.bilstm.emb_dim = 16;
    cfg.bilstm.hidden = 8;
    cfg.bilstm.dense = 8;
    cfg.bilstm.seq_len = 24;
    cfg.bilstm.epochs = 3;
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn benchmark_files_are_reproducible() {
    let cfg = quick_config(42);
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    bench::cmd_benchmark(&p, &Family::CLASSICAL, &cfg, false, a.path()).unwrap();
    bench::cmd_benchmark(&p, &Family::CLASSICAL, &cfg, false, b.path()).unwrap();
    for f in ["leaderboard_metrics.csv", "leaderboard_std.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_eq!(
        common::without_last_column(&read(a.path(), "leaderboard.csv")),
        common::without_last_column(&read(b.path(), "leaderboard.csv"))
    );
    let header = read(a.path(), "leaderboard.csv").lines().next().unwrap().to_string();
    assert_eq!(header, "Model,Accuracy,AUC,Recall,Prec.,F1,Kappa,TT (Sec)");
}

#[test]
fn parallel_and_serial_folds_agree() {
    let mut cfg = quick_config(7);
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let (docs, labels) = p.train();
    cfg.parallel_folds = true;
    let par = bench::benchmark(&Family::CLASSICAL, &docs, &labels, &cfg, false).unwrap();
    cfg.parallel_folds = false;
    let ser = bench::benchmark(&Family::CLASSICAL, &docs, &labels, &cfg, false).unwrap();
    assert_eq!(bench::leaderboard_csv(&par, false), bench::leaderboard_csv(&ser, false));
    assert_eq!(bench::leaderboard_std_csv(&par), bench::leaderboard_std_csv(&ser));
    for (a, b) in par.rows.iter().zip(&ser.rows) {
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std, b.std);
    }
}

#[test]
fn leaderboard_has_one_sorted_row_per_family() {
    let cfg = quick_config(3);
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let (docs, labels) = p.train();
    let run = bench::benchmark(&Family::CLASSICAL, &docs, &labels, &cfg, false).unwrap();
    let fams: BTreeSet<Family> = run.rows.iter().map(|r| r.family).collect();
    assert_eq!(fams.len(), 3);
    assert!(run.rows.windows(2).all(|w| w[0].mean.accuracy >= w[1].mean.accuracy));
    for r in &run.rows {
        assert!(r.tt_sec > 0.0 && r.wall_time_s > 0.0);
        assert_eq!(r.mean.auc.is_none(), r.family == Family::SvmLinear);
    }
    let text = bench::render_leaderboard(&run, true);
    assert!(text.contains("n/a"));
    assert!(text.starts_with("Model"));
}

#[test]
fn train_dl_outputs_are_reproducible() {
    let mut cfg = quick_config(11);
    small_bilstm(&mut cfg);
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = bench::cmd_train_dl(&p, &cfg, a.path(), &mut |_| {}).unwrap();
    let ob = bench::cmd_train_dl(&p, &cfg, b.path(), &mut |_| {}).unwrap();
    for f in ["curves.csv", "report.txt", "report.csv", "confusion.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_eq!(oa.artifact.classifier, ob.artifact.classifier);
    assert_eq!(oa.param_count, oa.artifact.param_count());
}

#[test]
fn vocabularies_come_from_training_rows_only() {
    // every held-out row carries a token that appears nowhere in training
    let mut corpus = common::bundled_corpus();
    let cfg = quick_config(5);
    let split = corpus::stratified_split(&corpus, cfg.split_ratios, cfg.seed).unwrap();
    let held: BTreeSet<usize> = split.validation.iter().chain(&split.test).copied().collect();
    for ex in corpus.iter_mut().filter(|e| held.contains(&e.id)) {
        ex.text.push_str(&format!(" heldout{}", ex.id));
    }
    let p = prepare(corpus, &cfg).unwrap();
    let leaked = |terms: &[String]| terms.iter().any(|t| t.starts_with("heldout"));

    let dir = tempfile::tempdir().unwrap();
    let out = bench::cmd_train(&p, Family::Logistic, &cfg, dir.path()).unwrap();
    let Classifier::Linear { tfidf, .. } = &out.artifact.classifier else { panic!() };
    assert!(!leaked(tfidf.terms()));

    let mut dl_cfg = cfg.clone();
    small_bilstm(&mut dl_cfg);
    dl_cfg.bilstm.epochs = 1;
    let out = bench::cmd_train_dl(&p, &dl_cfg, dir.path(), &mut |_| {}).unwrap();
    let Classifier::Bilstm(m) = &out.artifact.classifier else { panic!() };
    assert!(!leaked(m.vocab.tokens()));

    // cross-validation folds: the model fitted for a fold never sees that fold's tokens
    let (docs, labels) = p.train();
    let mut marked = docs.clone();
    for (i, d) in marked.iter_mut().enumerate() {
        d.tokens.push(format!("heldout{i}"));
    }
    let ids: Vec<usize> = (0..marked.len()).collect();
    let plan = corpus::make_folds(&ids, &labels, cfg.cv_k, cfg.seed).unwrap();
    for fold in 0..cfg.cv_k {
        let (train, heldout) = plan.train_val(fold);
        let tr_docs: Vec<_> = train.iter().map(|&i| marked[i].clone()).collect();
        let tr_y: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let clf = bench::fit_classical(Family::Gbdt, &tr_docs, &tr_y, &cfg, 0).unwrap();
        let Classifier::Gbdt { tfidf, .. } = &clf else { panic!() };
        for i in heldout {
            assert!(tfidf.column(&format!("heldout{i}")).is_none());
        }
    }
}

#[test]
fn tuning_is_reproducible_and_stays_in_grid() {
    let mut cfg = quick_config(42);
    cfg.set("tune.logistic.lr", "0.01,0.1").unwrap();
    cfg.set("tune.logistic.l2", "1e-5,1e-4,1e-3").unwrap();
    cfg.tune_budget = 4;
    cfg.cv_k = 3;
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let (docs, labels) = p.train();
    let a = tune::tune(Family::Logistic, &docs, &labels, &cfg).unwrap();
    let b = tune::tune(Family::Logistic, &docs, &labels, &cfg).unwrap();
    assert_eq!(a.best_trial().params, b.best_trial().params);
    assert_eq!(a.best_config, b.best_config);
    assert_eq!(tune::trials_csv(&a), tune::trials_csv(&b));
    let grid = grid_points(&cfg.tune_grids[&Family::Logistic]);
    assert_eq!(grid.len(), 6);
    assert_eq!(a.trials.len(), 4);
    for t in &a.trials {
        assert!(grid.contains(&t.params));
    }
    // the shipped default (lr 0.1, l2 1e-4) is always evaluated
    assert_eq!(tune::render_point(&a.trials[0].params), "l2=1e-4 lr=0.1");
    let best = a.best_trial().mean.macro_f1;
    assert!(a.trials.iter().all(|t| t.mean.macro_f1 <= best));
}

#[test]
fn prep_and_split_commands_write_files() {
    let cfg = quick_config(1);
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = bench::cmd_prep(&p, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 1500);
    bench::cmd_split(&p, &cfg, dir.path()).unwrap();
    let split: serde_json::Value = serde_json::from_str(&read(dir.path(), "split.json")).unwrap();
    assert_eq!(split["train"].as_array().unwrap().len(), 1200);
    assert_eq!(split["validation"].as_array().unwrap().len(), 150);
    let folds: serde_json::Value = serde_json::from_str(&read(dir.path(), "folds.json")).unwrap();
    assert_eq!(folds["folds"].as_array().unwrap().len(), cfg.cv_k);
}

#[test]
fn evaluate_matches_training_report() {
    let cfg = quick_config(2);
    let p = prepare(common::bundled_corpus(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = bench::cmd_train(&p, Family::SvmLinear, &cfg, dir.path()).unwrap();
    let test_rows: Vec<_> = p.split.test.iter().map(|&i| p.corpus[i].clone()).collect();
    let loaded = sentibench::model_store::load(&out.model_path).unwrap();
    let eval_dir = tempfile::tempdir().unwrap();
    let rep = bench::cmd_evaluate(&loaded, &test_rows, eval_dir.path(), false).unwrap();
    assert_eq!(rep.confusion, out.report.confusion);
    assert_eq!(read(dir.path(), "confusion.csv"), read(eval_dir.path(), "confusion.csv"));
}
