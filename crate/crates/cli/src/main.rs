use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sentibench::bench::{self, synth, tune, RunConfig};
use sentibench::corpus::{self, CorpusSchema, LabeledExample};
use sentibench::model_store::{self, Family};

#[derive(Parser)]
#[command(name = "sentibench", version, about = "Sentiment classification benchmark for Indonesian product reviews")]
struct Cli {
    /// Master seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: runs/<time>-seed<seed>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set cv.k=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct CorpusArg {
    /// CSV or JSONL corpus; the bundled synthetic corpus is used when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clean every example and write clean.jsonl.
    Prep(CorpusArg),
    /// Write the stratified split and fold plan.
    Split(CorpusArg),
    /// Cross-validate the classical models and write the leaderboard.
    Benchmark {
        #[command(flatten)]
        corpus: CorpusArg,
        /// Comma-separated families (logistic, svm, gbdt).
        #[arg(long, value_delimiter = ',', default_value = "logistic,svm,gbdt")]
        models: Vec<String>,
        /// Label the run as tuned (use with a config from `tune`).
        #[arg(long)]
        tuned: bool,
    },
    /// Random search over the configured grid for one family.
    Tune {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        model: String,
    },
    /// Fit one classical family on the training part and evaluate on the test part.
    Train {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        model: String,
    },
    /// Train the BiLSTM with early stopping and evaluate on the test part.
    TrainDl(CorpusArg),
    /// Evaluate a saved model on a labeled corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        corpus: CorpusArg,
    },
    /// Predict one text or every line of a file; prints JSON lines.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "file")]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Serve POST /predict and GET /health.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Write the synthetic corpus as CSV.
    Synth {
        #[arg(long, default_value_t = synth::SYNTH_DOCS)]
        n: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let pairs = cli
        .overrides
        .iter()
        .map(|kv| kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`")))
        .collect::<Result<Vec<_>>>()?;
    cfg.apply(pairs)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_corpus(arg: &CorpusArg, cfg: &RunConfig) -> Result<Vec<LabeledExample>> {
    match &arg.corpus {
        Some(p) => bench::load_corpus(p, cfg).with_context(|| format!("loading {}", p.display())),
        None => {
            eprintln!("no --corpus given; using the bundled synthetic corpus");
            Ok(corpus::read_csv(synth::BUNDLED_SYNTHETIC_CSV.as_bytes(), &CorpusSchema::default())?)
        }
    }
}

fn prepared(arg: &CorpusArg, cfg: &RunConfig) -> Result<bench::Prepared> {
    Ok(bench::prepare(read_corpus(arg, cfg)?, cfg)?)
}

fn family(s: &str) -> Result<Family> {
    Ok(s.parse::<Family>()?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = cli.out.clone().unwrap_or_else(|| bench::default_run_dir(cfg.seed));
    let out = out.as_path();
    match &cli.cmd {
        Cmd::Prep(c) => {
            let path = bench::cmd_prep(&prepared(c, &cfg)?, out)?;
            println!("{}", path.display());
        }
        Cmd::Split(c) => {
            let (split, _) = bench::cmd_split(&prepared(c, &cfg)?, &cfg, out)?;
            println!(
                "train {}  validation {}  test {}  -> {}",
                split.train.len(),
                split.validation.len(),
                split.test.len(),
                out.display()
            );
        }
        Cmd::Benchmark { corpus, models, tuned } => {
            let families = models.iter().map(|m| family(m)).collect::<Result<Vec<_>>>()?;
            let run = bench::cmd_benchmark(&prepared(corpus, &cfg)?, &families, &cfg, *tuned, out)?;
            print!("{}", bench::render_leaderboard(&run, true));
            println!("written to {}", out.display());
        }
        Cmd::Tune { corpus, model } => {
            let fam = family(model)?;
            let r = tune::cmd_tune(&prepared(corpus, &cfg)?, fam, &cfg, out)?;
            let best = r.best_trial();
            println!(
                "best of {} trials: {} (mean macro-F1 {:.4}) -> {}",
                r.trials.len(),
                tune::render_point(&best.params),
                best.mean.macro_f1,
                out.join(format!("best_{}.cfg", fam.as_str())).display()
            );
        }
        Cmd::Train { corpus, model } => {
            let fam = family(model)?;
            let o = bench::cmd_train(&prepared(corpus, &cfg)?, fam, &cfg, out)?;
            print!("{}", sentibench::metrics::render_classification_report(&o.report));
            println!("model: {}", o.model_path.display());
        }
        Cmd::TrainDl(c) => {
            let p = prepared(c, &cfg)?;
            let o = bench::cmd_train_dl(&p, &cfg, out, &mut |line| eprintln!("{line}"))?;
            print!("{}", sentibench::metrics::render_classification_report(&o.report));
            println!("parameters: {}", o.param_count);
            println!("model: {}", o.model_path.display());
        }
        Cmd::Evaluate { model, corpus } => {
            let artifact = model_store::load(model)?;
            let data = read_corpus(corpus, &cfg)?;
            let report = bench::cmd_evaluate(&artifact, &data, out, cfg.plots)?;
            print!("{}", sentibench::metrics::render_classification_report(&report));
        }
        Cmd::Predict { model, text, file } => {
            let artifact = model_store::load(model)?;
            let texts: Vec<String> = match (text, file) {
                (Some(t), None) => vec![t.clone()],
                (None, Some(f)) => read_lines(f)?,
                _ => bail!("give exactly one of --text or --file"),
            };
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for line in bench::predict_json_lines(&artifact, &texts)? {
                writeln!(w, "{line}")?;
            }
        }
        Cmd::Serve { model, bind } => {
            let artifact = Arc::new(model_store::load(model)?);
            eprintln!("serving {} model on http://{bind}", artifact.family());
            tokio::runtime::Runtime::new()?.block_on(sentibench::serve::serve(artifact, *bind))?;
        }
        Cmd::Synth { n } => {
            let data = synth::synthetic_corpus(*n, cfg.seed);
            std::fs::create_dir_all(out)?;
            let path = out.join("synthetic_corpus.csv");
            std::fs::write(&path, synth::to_csv(&data))?;
            eprint!("{}", synth::summary(&data));
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    std::io::BufReader::new(f)
        .lines()
        .map(|l| l.map_err(Into::into))
        .collect()
}

/// The error chain joined by `: `, skipping causes whose text an outer
/// message already includes.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if !out.contains(&s) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&s);
        }
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            if matches!(e.downcast_ref::<sentibench::Error>().map(|e| e.root()), Some(sentibench::Error::Diverged)) {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
