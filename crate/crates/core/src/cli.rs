//! `ctxrel` command line: flag parsing, key=value config files and output
//! files under `--out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::analysis::{self, Axis, Filler, LabeledTable};
use crate::checkpoint::{fingerprint_bytes, Checkpoint};
use crate::correlation::correlate_instance;
use crate::corpus::{parse_conll, Corpus, ParseOptions, TagScheme, TagSet};
use crate::embeddings::EmbeddingTable;
use crate::error::Error;
use crate::nn::{self, CellKind, Side};
use crate::relevance::{self, Erasure, Measure, Method, RelevanceTable, Replacement, WfOptions};
use crate::seed;
use crate::synthetic::{gen_synthetic, SyntheticSpec};
use crate::trainer::{self, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "ctxrel", version, about = "Context-word relevance for BiRNN-CRF taggers")]
struct Cli {
    /// Flat key=value file. Keys are long flag names; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a tagger and write model.ckpt, best.ckpt and trace.csv.
    Train(TrainArgs),
    /// Span precision / recall / F1 of a checkpoint on a dataset.
    Evaluate(ModelDataArgs),
    /// Frequency relevance table (wf.csv).
    ScoreWf(WfArgs),
    /// Sentence-likelihood erasure relevance (sll.csv).
    ScoreSll(ErasureArgs),
    /// Left/right-context erasure relevance (lrc.csv).
    ScoreLrc(ErasureArgs),
    /// Per-tag similarity with the hidden state at every entity token (corr.csv).
    Correlate(CorrelateArgs),
    /// Word × entity-type scores for a single sentence (report.csv).
    ReportSentence(ReportArgs),
    /// Relevance of a context word as its distance to the entity grows (probe.csv).
    ProbePosition(ProbePositionArgs),
    /// Per-sentence relevance of one word on real data (probe_word.csv).
    ProbeWord(ProbeWordArgs),
    /// Mis-tagged entity tokens with the context words that may explain them (errors.csv).
    ErrorReport(ErrorReportArgs),
    /// Lay relevance tables out as a grid (heatmap.csv, heatmap.svg).
    Heatmap(HeatmapArgs),
    /// Write a trigger-word corpus with vectors.
    GenSynthetic(SyntheticArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<String>,
    /// Master seed; subsystem seeds are derived from it.
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args, Debug, Default)]
struct Format {
    /// 1-based tag column [default: last]
    #[arg(long)]
    tag_column: Option<String>,
    /// iob1 or bio2 [default: bio2]
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    dev: Option<String>,
    #[arg(long)]
    emb: Option<String>,
    /// rnn, lstm or gru [default: lstm]
    #[arg(long)]
    cell: Option<String>,
    /// Expected embedding dimension; checked against the vector file.
    #[arg(long)]
    dim: Option<String>,
    /// [default: 50]
    #[arg(long)]
    hidden: Option<String>,
    /// [default: 0.05]
    #[arg(long)]
    lr: Option<String>,
    /// [default: 21]
    #[arg(long)]
    epochs: Option<String>,
    /// Gradient-norm ceiling, or "none" [default: 5]
    #[arg(long)]
    clip: Option<String>,
    /// Keep the transition scores at zero.
    #[arg(long)]
    freeze_transitions: bool,
    #[command(flatten)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ModelDataArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    emb: Option<String>,
    #[command(flatten)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct WfArgs {
    #[arg(long)]
    data: Option<String>,
    /// Weight by inverse overall frequency.
    #[arg(long)]
    inverse: bool,
    /// Smoothing constant of the inverse variant [default: 1]
    #[arg(long)]
    k: Option<String>,
    /// Window half-width [default: 5]
    #[arg(long)]
    window: Option<String>,
    #[command(flatten)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ErasureArgs {
    #[command(flatten)]
    io: ModelDataArgs,
    /// Comma-separated dot, kl, pcc (LRC only) [default: dot]
    #[arg(long)]
    measure: Option<String>,
    /// per-run, per-sentence, per-word or original [default: per-run]
    #[arg(long)]
    replacement: Option<String>,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    #[command(flatten)]
    io: ModelDataArgs,
    /// left, right or both [default: both]
    #[arg(long)]
    side: Option<String>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[command(flatten)]
    io: ModelDataArgs,
    /// Sentence index in the data file, from 0.
    #[arg(long)]
    sentence: Option<String>,
    /// sll or lrc [default: lrc]
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    replacement: Option<String>,
}

#[derive(Args, Debug)]
struct ModelsArgs {
    /// Checkpoints as label=path or path (labelled by the parent directory).
    #[arg(long, num_args = 1..)]
    models: Vec<String>,
    #[arg(long)]
    emb: Option<String>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    replacement: Option<String>,
}

#[derive(Args, Debug)]
struct ProbePositionArgs {
    #[command(flatten)]
    models: ModelsArgs,
    #[arg(long)]
    context: Option<String>,
    #[arg(long)]
    entity: Option<String>,
    #[arg(long = "type")]
    entity_type: Option<String>,
    /// [default: 10]
    #[arg(long)]
    max_distance: Option<String>,
    /// oov or random [default: oov]
    #[arg(long)]
    filler: Option<String>,
    /// Divide each curve by its largest magnitude.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ProbeWordArgs {
    #[command(flatten)]
    models: ModelsArgs,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    word: Option<String>,
    #[arg(long = "type")]
    entity_type: Option<String>,
    #[command(flatten)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ErrorReportArgs {
    #[command(flatten)]
    io: ModelDataArgs,
    /// Relevance CSV to consult; computed from the data when absent.
    #[arg(long)]
    table: Option<String>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    replacement: Option<String>,
}

#[derive(Args, Debug)]
struct HeatmapArgs {
    /// Relevance CSVs as label=path or path (labelled by the parent directory).
    #[arg(long, num_args = 1..)]
    tables: Vec<String>,
    /// Comma-separated axis=value pairs held fixed.
    #[arg(long)]
    fix: Option<String>,
    /// word, model, entity, method or measure
    #[arg(long)]
    rows: Option<String>,
    #[arg(long)]
    cols: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SyntheticArgs {
    /// [default: 500]
    #[arg(long)]
    sentences: Option<String>,
    /// Comma-separated TYPE:trigger pairs [default: PER:ttl,LOC:lcx]
    #[arg(long)]
    types: Option<String>,
    #[arg(long)]
    trigger_prob: Option<String>,
    #[arg(long)]
    max_entity_len: Option<String>,
    /// Vector dimension [default: 16]
    #[arg(long)]
    dim: Option<String>,
    #[command(flatten)]
    common: Common,
}

const KNOWN_KEYS: &[&str] = &[
    "out", "seed", "tag-column", "scheme", "train", "dev", "emb", "cell", "dim", "hidden", "lr", "epochs", "clip",
    "freeze-transitions", "model", "data", "inverse", "k", "window", "measure", "replacement", "side", "sentence",
    "method", "models", "context", "entity", "type", "max-distance", "filler", "normalize", "word", "table", "tables",
    "fix", "rows", "cols", "sentences", "types", "trigger-prob", "max-entity-len",
];

#[derive(Debug)]
enum CliError {
    /// Bad or missing configuration; exit status 2.
    Config(String),
    /// Failure while running the pipeline; exit status 1.
    Runtime(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Flag values layered over a config file.
struct Settings {
    command: &'static str,
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(command: &'static str, path: Option<&Path>) -> CliResult<Self> {
        let mut file = BTreeMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("config {} line {}: expected key=value", p.display(), i + 1)))?;
                let key = k.trim().replace('_', "-");
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    log::warn!("config key {key:?} is not recognised");
                }
                file.insert(key, v.trim().to_string());
            }
        }
        Ok(Settings { command, file })
    }

    fn raw(&self, key: &str, flag: &Option<String>) -> Option<String> {
        flag.clone().or_else(|| self.file.get(key).cloned())
    }

    fn opt<T: FromStr>(&self, key: &str, flag: &Option<String>) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key, flag) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("--{key} {v:?}: {e}"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, flag: &Option<String>, default: T) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    fn req<T: FromStr>(&self, key: &str, flag: &Option<String>) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        self.opt(key, flag)?.ok_or_else(|| self.missing(key))
    }

    fn missing(&self, key: &str) -> CliError {
        let usage = Cli::command()
            .find_subcommand_mut(self.command)
            .map(|c| c.render_usage().to_string())
            .unwrap_or_default();
        CliError::Config(format!("missing required --{key}\n\n{usage}"))
    }

    fn flag(&self, key: &str, flag: bool) -> CliResult<bool> {
        if flag {
            return Ok(true);
        }
        match self.file.get(key).map(|s| s.to_ascii_lowercase()) {
            None => Ok(false),
            Some(v) if matches!(v.as_str(), "true" | "1" | "yes") => Ok(true),
            Some(v) if matches!(v.as_str(), "false" | "0" | "no") => Ok(false),
            Some(v) => Err(CliError::Config(format!("{key}: expected true or false, got {v:?}"))),
        }
    }

    fn list(&self, key: &str, flag: &[String]) -> Vec<String> {
        if !flag.is_empty() {
            return flag.to_vec();
        }
        self.file
            .get(key)
            .map(|v| v.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    }

    /// Required path that must already exist.
    fn input(&self, key: &str, flag: &Option<String>) -> CliResult<PathBuf> {
        let p: PathBuf = self.req(key, flag)?;
        existing(key, p)
    }

    fn out_dir(&self, common: &Common) -> CliResult<PathBuf> {
        let dir: PathBuf = self.or("out", &common.out, PathBuf::from("."))?;
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn format(&self, f: &Format) -> CliResult<ParseOptions> {
        let column: Option<usize> = self.opt("tag-column", &f.tag_column)?;
        if column == Some(0) {
            return Err(CliError::Config("--tag-column counts from 1".into()));
        }
        Ok(ParseOptions {
            column: column.map(|c| c - 1),
            scheme: self.or("scheme", &f.scheme, TagScheme::Bio2)?,
            ..ParseOptions::default()
        })
    }

    fn measures(&self, flag: &Option<String>) -> CliResult<Vec<Measure>> {
        let raw = self.raw("measure", flag).unwrap_or_else(|| "dot".into());
        let mut out = Vec::new();
        for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Measure = part.parse().map_err(|e| CliError::Config(format!("--measure: {e}")))?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(CliError::Config("--measure names no measure".into()));
        }
        Ok(out)
    }

    fn measure(&self, flag: &Option<String>) -> CliResult<Measure> {
        match self.measures(flag)?.as_slice() {
            [m] => Ok(*m),
            _ => Err(CliError::Config("this command takes a single --measure".into())),
        }
    }
}

fn existing(key: &str, p: PathBuf) -> CliResult<PathBuf> {
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Config(format!("--{key}: {} does not exist", p.display())))
    }
}

/// `label=path`, or a bare path labelled by its parent directory.
fn labelled(key: &str, spec: &str) -> CliResult<(String, PathBuf)> {
    let (label, path) = match spec.split_once('=') {
        Some((l, p)) if !l.is_empty() => (l.to_string(), PathBuf::from(p)),
        _ => {
            let p = PathBuf::from(spec);
            let label = p
                .parent()
                .and_then(|d| d.file_name())
                .or_else(|| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (label, p)
        }
    };
    Ok((label, existing(key, path)?))
}

fn read_corpus(path: &Path, opts: &ParseOptions, hint: Option<&TagSet>) -> CliResult<Corpus> {
    let text = fs::read_to_string(path)?;
    Ok(parse_conll(&text, opts, hint)?)
}

/// Vector file contents with their fingerprint; parsed per model so each
/// gets the OOV row drawn from its own seed.
struct Vectors {
    text: String,
    fingerprint: String,
}

impl Vectors {
    fn read(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path)?;
        let fingerprint = fingerprint_bytes(&bytes);
        let text = String::from_utf8(bytes).map_err(|_| Error::invalid(format!("{} is not UTF-8", path.display())))?;
        Ok(Vectors { text, fingerprint })
    }

    fn table(&self, model_seed: u64) -> CliResult<EmbeddingTable> {
        let oov = seed::derive(model_seed, seed::streams::OOV);
        log::info!("oov seed {oov}");
        Ok(EmbeddingTable::from_text(&self.text, oov)?)
    }
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Ok(Checkpoint::load(path)?)
}

/// Model, its embeddings and the data parsed against its tag set.
struct Loaded {
    ckpt: Checkpoint,
    emb: EmbeddingTable,
    corpus: Corpus,
}

fn load_model_data(s: &Settings, a: &ModelDataArgs) -> CliResult<Loaded> {
    let ckpt = load_checkpoint(&s.input("model", &a.model)?)?;
    let vectors = Vectors::read(&s.input("emb", &a.emb)?)?;
    let data = s.input("data", &a.data)?;
    ckpt.check_fingerprint(&vectors.fingerprint);
    let emb = vectors.table(ckpt.model.hyper.seed)?;
    check_dim(&ckpt, &emb)?;
    let corpus = read_corpus(&data, &s.format(&a.format)?, Some(&ckpt.tagset))?;
    Ok(Loaded { ckpt, emb, corpus })
}

fn check_dim(ckpt: &Checkpoint, emb: &EmbeddingTable) -> CliResult<()> {
    if ckpt.model.input_dim() != emb.dim() {
        return Err(CliError::Config(format!(
            "model expects {}-dimensional vectors, embedding file has {}",
            ckpt.model.input_dim(),
            emb.dim()
        )));
    }
    Ok(())
}

fn erasure(s: &Settings, common: &Common, replacement: &Option<String>, model_seed: u64) -> CliResult<Erasure> {
    let base: u64 = s.or("seed", &common.seed, model_seed)?;
    let policy: Replacement = s.or("replacement", replacement, Replacement::PerRun)?;
    log::info!("replacement seed {}", seed::derive(base, seed::streams::REPLACEMENT));
    Ok(Erasure::new(base).with_policy(policy))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let p = dir.join(name);
    fs::write(&p, bytes)?;
    Ok(p)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> crate::error::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Parse `argv` (program name first), run the command and return the exit
/// status: 0 on success, 2 on usage or configuration errors, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<String> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Train(a) => train(&Settings::load("train", cfg)?, &a),
        Command::Evaluate(a) => evaluate(&Settings::load("evaluate", cfg)?, &a),
        Command::ScoreWf(a) => score_wf(&Settings::load("score-wf", cfg)?, &a),
        Command::ScoreSll(a) => score_erasure(&Settings::load("score-sll", cfg)?, &a, Method::Sll),
        Command::ScoreLrc(a) => score_erasure(&Settings::load("score-lrc", cfg)?, &a, Method::Lrc),
        Command::Correlate(a) => correlate(&Settings::load("correlate", cfg)?, &a),
        Command::ReportSentence(a) => report_sentence(&Settings::load("report-sentence", cfg)?, &a),
        Command::ProbePosition(a) => probe_position(&Settings::load("probe-position", cfg)?, &a),
        Command::ProbeWord(a) => probe_word(&Settings::load("probe-word", cfg)?, &a),
        Command::ErrorReport(a) => error_report(&Settings::load("error-report", cfg)?, &a),
        Command::Heatmap(a) => heatmap(&Settings::load("heatmap", cfg)?, &a),
        Command::GenSynthetic(a) => synthetic(&Settings::load("gen-synthetic", cfg)?, &a),
    }
}

fn train(s: &Settings, a: &TrainArgs) -> CliResult<String> {
    let train_path = s.input("train", &a.train)?;
    let dev_path = s.opt::<PathBuf>("dev", &a.dev)?.map(|p| existing("dev", p)).transpose()?;
    let emb_path = s.input("emb", &a.emb)?;
    let clip = match s.raw("clip", &a.clip).as_deref() {
        Some("none") => None,
        _ => Some(s.or("clip", &a.clip, 5.0)?),
    };
    let config = TrainConfig {
        lr: s.or("lr", &a.lr, 0.05)?,
        epochs: s.or("epochs", &a.epochs, 21)?,
        seed: s.or("seed", &a.common.seed, 1)?,
        cell: s.or("cell", &a.cell, CellKind::Lstm)?,
        hidden: s.or("hidden", &a.hidden, 50)?,
        clip,
        freeze_transitions: s.flag("freeze-transitions", a.freeze_transitions)?,
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let dim: Option<usize> = s.opt("dim", &a.dim)?;
    if dim == Some(0) {
        return Err(CliError::Config("--dim must be positive".into()));
    }
    let out = s.out_dir(&a.common)?;
    let opts = s.format(&a.format)?;

    let vectors = Vectors::read(&emb_path)?;
    let emb = vectors.table(config.seed)?;
    if let Some(d) = dim {
        if d != emb.dim() {
            return Err(CliError::Config(format!("--dim {d} but the embedding file has dimension {}", emb.dim())));
        }
    }
    let train_set = read_corpus(&train_path, &opts, None)?;
    let tagset = train_set.tagset.clone();
    let dev_set = dev_path.map(|p| read_corpus(&p, &opts, Some(&tagset))).transpose()?;
    log::info!(
        "init seed {}, shuffle seed {}",
        seed::derive(config.seed, seed::streams::INIT),
        seed::derive(config.seed, seed::streams::SHUFFLE)
    );

    let outcome = trainer::train_with(
        &train_set.sentences,
        dev_set.as_ref().map(|c| c.sentences.as_slice()),
        &tagset,
        &emb,
        &config,
        |st| {
            let f1 = st.dev_f1.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
            eprintln!("epoch\t{}\tnll\t{:.6}\tdev_f1\t{f1}", st.epoch, st.mean_nll);
        },
    )?;

    let save = |model: &nn::ModelParams, name: &str| -> CliResult<()> {
        Checkpoint {
            model: model.clone(),
            tagset: tagset.clone(),
            fingerprint: Some(vectors.fingerprint.clone()),
        }
        .save(&out.join(name))?;
        Ok(())
    };
    save(&outcome.model, "model.ckpt")?;
    save(&outcome.best, "best.ckpt")?;
    let trace = csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["epoch", "mean_nll", "dev_f1"])?;
        for st in &outcome.trace {
            w.write_record([
                st.epoch.to_string(),
                st.mean_nll.to_string(),
                st.dev_f1.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_file(&out, "trace.csv", &trace)?;
    let last = outcome.trace.last().expect("at least one epoch");
    let dev = match last.dev_f1 {
        Some(_) => format!(
            ", best dev F1 {:.2} at epoch {}",
            outcome.trace[outcome.best_epoch - 1].dev_f1.unwrap_or(0.0),
            outcome.best_epoch
        ),
        None => String::new(),
    };
    Ok(format!(
        "train: {} h={} {} epochs, final nll {:.4}{dev} -> {}",
        config.cell,
        config.hidden,
        config.epochs,
        last.mean_nll,
        out.join("model.ckpt").display()
    ))
}

fn evaluate(s: &Settings, a: &ModelDataArgs) -> CliResult<String> {
    let l = load_model_data(s, a)?;
    let out = s.out_dir(&a.common)?;
    let report = trainer::evaluate(&l.ckpt.model, &l.corpus.sentences, &l.ckpt.tagset, &l.emb)?;
    let bytes = csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["entity_type", "gold", "predicted", "correct", "precision", "recall", "f1"])?;
        let rows = report.per_type.iter().map(|(n, c)| (n.as_str(), c)).chain([("overall", &report.overall)]);
        for (name, c) in rows {
            w.write_record([
                name.to_string(),
                c.gold.to_string(),
                c.predicted.to_string(),
                c.correct.to_string(),
                c.precision.to_string(),
                c.recall.to_string(),
                c.f1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let p = write_file(&out, "eval.csv", &bytes)?;
    Ok(format!(
        "evaluate: {} sentences, P {:.2} R {:.2} F1 {:.2}, token accuracy {:.2} -> {}",
        l.corpus.sentences.len(),
        report.overall.precision,
        report.overall.recall,
        report.overall.f1,
        100.0 * report.token_accuracy,
        p.display()
    ))
}

fn table_summary(name: &str, t: &RelevanceTable) -> String {
    let tops: Vec<String> = t
        .entity_types()
        .iter()
        .filter_map(|e| t.ranking(e).first().map(|(w, v)| format!("{e}: {w} ({v:.4})")))
        .collect();
    format!("{name}: {} entries; top {}", t.len(), if tops.is_empty() { "-".into() } else { tops.join(", ") })
}

fn score_wf(s: &Settings, a: &WfArgs) -> CliResult<String> {
    let data = s.input("data", &a.data)?;
    let opts = WfOptions {
        halfwidth: s.or("window", &a.window, relevance::DEFAULT_HALFWIDTH)?,
        inverse: s.flag("inverse", a.inverse)?,
        k: s.or("k", &a.k, 1.0)?,
    };
    if !(opts.k > 0.0) && opts.inverse {
        return Err(CliError::Config("--k must be positive".into()));
    }
    let out = s.out_dir(&a.common)?;
    let corpus = read_corpus(&data, &s.format(&a.format)?, None)?;
    let table = relevance::score_wf(&corpus.sentences, &corpus.tagset, opts)?;
    let p = write_file(&out, "wf.csv", &csv_bytes(|b| relevance::write_tables_csv(b, &[&table]))?)?;
    Ok(format!("{} -> {}", table_summary(&table.method.to_string(), &table), p.display()))
}

fn score_erasure(s: &Settings, a: &ErasureArgs, method: Method) -> CliResult<String> {
    let l = load_model_data(s, &a.io)?;
    let er = erasure(s, &a.io.common, &a.replacement, l.ckpt.model.hyper.seed)?;
    let measures = s.measures(&a.measure)?;
    let out = s.out_dir(&a.io.common)?;
    let (m, ts, sents) = (&l.ckpt.model, &l.ckpt.tagset, &l.corpus.sentences);
    let tables = match method {
        Method::Sll => vec![relevance::score_sll(m, sents, ts, &l.emb, &er)?],
        _ => measures
            .iter()
            .map(|&ms| relevance::score_lrc(m, sents, ts, &l.emb, &er, ms))
            .collect::<crate::error::Result<Vec<_>>>()?,
    };
    let refs: Vec<&RelevanceTable> = tables.iter().collect();
    let name = format!("{method}.csv");
    let p = write_file(&out, &name, &csv_bytes(|b| relevance::write_tables_csv(b, &refs))?)?;
    let parts: Vec<String> = tables
        .iter()
        .map(|t| {
            let label = t.measure.map_or_else(|| method.to_string(), |ms| format!("{method}-{ms}"));
            table_summary(&label, t)
        })
        .collect();
    Ok(format!("{} -> {}", parts.join("; "), p.display()))
}

fn correlate(s: &Settings, a: &CorrelateArgs) -> CliResult<String> {
    let l = load_model_data(s, &a.io)?;
    let sides = match s.raw("side", &a.side).as_deref().unwrap_or("both") {
        "both" => vec![Side::Left, Side::Right],
        other => vec![other.parse::<Side>().map_err(|e| CliError::Config(format!("--side: {e}")))?],
    };
    let out = s.out_dir(&a.io.common)?;
    let ts = &l.ckpt.tagset;
    let mut hits = vec![0usize; sides.len()];
    let mut total = 0usize;
    let bytes = csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["sentence", "token", "word", "gold", "side", "rank", "tag", "dot", "kl", "pcc"])?;
        for sent in &l.corpus.sentences {
            let states = nn::encode_bidirectional(&l.ckpt.model, &l.emb.sentence_vectors(sent))?;
            for (i, tok) in sent.tokens.iter().enumerate() {
                if tok.gold_tag == ts.outside() {
                    continue;
                }
                total += 1;
                for (k, &side) in sides.iter().enumerate() {
                    let rows = correlate_instance(&l.ckpt.model, &states, i, side)?;
                    if rows[0].tag == tok.gold_tag {
                        hits[k] += 1;
                    }
                    for (rank, r) in rows.iter().enumerate() {
                        w.write_record([
                            sent.id.to_string(),
                            i.to_string(),
                            tok.surface.clone(),
                            ts.name(tok.gold_tag)?.to_string(),
                            side.to_string(),
                            (rank + 1).to_string(),
                            ts.name(r.tag)?.to_string(),
                            r.dot.to_string(),
                            r.kl.to_string(),
                            r.pcc.map(|v| v.to_string()).unwrap_or_default(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let p = write_file(&out, "corr.csv", &bytes)?;
    let parts: Vec<String> = sides
        .iter()
        .zip(&hits)
        .map(|(side, h)| format!("{side} {h}/{total}"))
        .collect();
    Ok(format!("correlate: true tag has the top dot product at {} entity tokens -> {}", parts.join(", "), p.display()))
}

fn report_sentence(s: &Settings, a: &ReportArgs) -> CliResult<String> {
    let l = load_model_data(s, &a.io)?;
    let idx: usize = s.req("sentence", &a.sentence)?;
    let method: Method = s.or("method", &a.method, Method::Lrc)?;
    if !matches!(method, Method::Sll | Method::Lrc) {
        return Err(CliError::Config("--method must be sll or lrc".into()));
    }
    let measure = s.measure(&a.measure)?;
    let er = erasure(s, &a.io.common, &a.replacement, l.ckpt.model.hyper.seed)?;
    let sent = l.corpus.sentences.get(idx).ok_or_else(|| {
        CliError::Config(format!("--sentence {idx}: the data has {} sentences", l.corpus.sentences.len()))
    })?;
    let out = s.out_dir(&a.io.common)?;
    let grid = relevance::sentence_report(&l.ckpt.model, sent, &l.ckpt.tagset, method, measure, &l.emb, &er)?;
    let p = write_file(&out, "report.csv", &csv_bytes(|b| grid.write_csv(b))?)?;
    Ok(format!(
        "report-sentence: sentence {idx}, {} words x {} types -> {}",
        grid.words.len(),
        grid.entity_types.len(),
        p.display()
    ))
}

struct LoadedModels {
    models: Vec<(String, Checkpoint, EmbeddingTable)>,
}

fn load_models(s: &Settings, a: &ModelsArgs) -> CliResult<LoadedModels> {
    let specs = s.list("models", &a.models);
    if specs.is_empty() {
        return Err(s.missing("models"));
    }
    let vectors = Vectors::read(&s.input("emb", &a.emb)?)?;
    let mut models = Vec::new();
    for spec in specs {
        let (label, path) = labelled("models", &spec)?;
        if models.iter().any(|(l, _, _)| *l == label) {
            return Err(CliError::Config(format!("model label {label:?} used twice")));
        }
        let ckpt = load_checkpoint(&path)?;
        ckpt.check_fingerprint(&vectors.fingerprint);
        let emb = vectors.table(ckpt.model.hyper.seed)?;
        check_dim(&ckpt, &emb)?;
        if let Some((_, first, _)) = models.first() {
            let first: &Checkpoint = first;
            if first.tagset != ckpt.tagset {
                return Err(CliError::Config(format!("model {label} uses a different tag set")));
            }
        }
        models.push((label, ckpt, emb));
    }
    Ok(LoadedModels { models })
}

fn probe_position(s: &Settings, a: &ProbePositionArgs) -> CliResult<String> {
    let lm = load_models(s, &a.models)?;
    let context: String = s.req("context", &a.context)?;
    let entity: String = s.req("entity", &a.entity)?;
    let etype: String = s.req("type", &a.entity_type)?;
    let max: usize = s.or("max-distance", &a.max_distance, 10)?;
    let filler: Filler = s.or("filler", &a.filler, Filler::FixedOov)?;
    let measure = s.measure(&a.models.measure)?;
    let normalize = s.flag("normalize", a.normalize)?;
    let out = s.out_dir(&a.common)?;
    let mut merged: Option<analysis::ProbeResult> = None;
    for (label, ckpt, emb) in &lm.models {
        let er = erasure(s, &a.common, &a.models.replacement, ckpt.model.hyper.seed)?;
        let r = analysis::positional_probe(
            &[(label.clone(), &ckpt.model)],
            &ckpt.tagset,
            &context,
            &entity,
            &etype,
            max,
            filler,
            emb,
            &er,
            measure,
        )?;
        match &mut merged {
            None => merged = Some(r),
            Some(m) => {
                m.models.extend(r.models);
                m.scores.extend(r.scores);
            }
        }
    }
    let mut result = merged.expect("at least one model");
    if normalize {
        result = result.normalized();
    }
    let p = write_file(&out, "probe.csv", &csv_bytes(|b| result.write_csv(b))?)?;
    Ok(format!(
        "probe-position: {context} -> {entity} ({etype}), distances 1..{max}, {} models -> {}",
        result.models.len(),
        p.display()
    ))
}

fn probe_word(s: &Settings, a: &ProbeWordArgs) -> CliResult<String> {
    let lm = load_models(s, &a.models)?;
    let data = s.input("data", &a.data)?;
    let word: String = s.req("word", &a.word)?;
    let etype: String = s.req("type", &a.entity_type)?;
    let measure = s.measure(&a.models.measure)?;
    let out = s.out_dir(&a.common)?;
    let tagset = lm.models[0].1.tagset.clone();
    let corpus = read_corpus(&data, &s.format(&a.format)?, Some(&tagset))?;
    let mut merged: Option<analysis::SentenceProbe> = None;
    for (label, ckpt, emb) in &lm.models {
        let er = erasure(s, &a.common, &a.models.replacement, ckpt.model.hyper.seed)?;
        let r = analysis::real_sentence_probe(
            &[(label.clone(), &ckpt.model)],
            &corpus.sentences,
            &tagset,
            &word,
            &etype,
            emb,
            &er,
            measure,
        )?;
        match &mut merged {
            None => merged = Some(r),
            Some(m) => {
                m.models.extend(r.models);
                for (row, extra) in m.rows.iter_mut().zip(r.rows) {
                    row.scores.extend(extra.scores);
                }
            }
        }
    }
    let result = merged.expect("at least one model");
    let p = write_file(&out, "probe_word.csv", &csv_bytes(|b| result.write_csv(b))?)?;
    Ok(format!(
        "probe-word: {} in {} sentences, {} models -> {}",
        result.word,
        result.rows.len(),
        result.models.len(),
        p.display()
    ))
}

fn error_report(s: &Settings, a: &ErrorReportArgs) -> CliResult<String> {
    let l = load_model_data(s, &a.io)?;
    let measure = s.measure(&a.measure)?;
    let er = erasure(s, &a.io.common, &a.replacement, l.ckpt.model.hyper.seed)?;
    let table = match s.opt::<PathBuf>("table", &a.table)? {
        Some(p) => {
            let p = existing("table", p)?;
            let tables = relevance::read_tables_csv(fs::File::open(&p)?)?;
            tables
                .iter()
                .find(|t| t.measure == Some(measure))
                .or_else(|| tables.first())
                .cloned()
                .ok_or_else(|| CliError::Runtime(Error::invalid(format!("{} holds no table", p.display()))))?
        }
        None => relevance::score_lrc(&l.ckpt.model, &l.corpus.sentences, &l.ckpt.tagset, &l.emb, &er, measure)?,
    };
    let out = s.out_dir(&a.io.common)?;
    let cases = analysis::error_report(&l.ckpt.model, &l.corpus.sentences, &l.ckpt.tagset, &table, &l.emb, &er, measure)?;
    let p = write_file(&out, "errors.csv", &csv_bytes(|b| analysis::write_error_csv(b, &cases))?)?;
    let with = cases.iter().filter(|c| !c.suspects.is_empty()).count();
    Ok(format!(
        "error-report: {} mis-tagged entity tokens, {with} with suspects -> {}",
        cases.len(),
        p.display()
    ))
}

fn heatmap(s: &Settings, a: &HeatmapArgs) -> CliResult<String> {
    let specs = s.list("tables", &a.tables);
    if specs.is_empty() {
        return Err(s.missing("tables"));
    }
    let fixed = analysis::parse_bindings(&s.raw("fix", &a.fix).unwrap_or_default())
        .map_err(|e| CliError::Config(format!("--fix: {e}")))?;
    let rows: Axis = s.req("rows", &a.rows)?;
    let cols: Axis = s.req("cols", &a.cols)?;
    let mut tables = Vec::new();
    for spec in &specs {
        let (label, path) = labelled("tables", spec)?;
        for table in relevance::read_tables_csv(fs::File::open(&path)?)? {
            tables.push(LabeledTable { model: label.clone(), table });
        }
    }
    let out = s.out_dir(&a.common)?;
    let grid = analysis::build_heatmap(&tables, &fixed, rows, cols).map_err(|e| CliError::Config(e.to_string()))?;
    let p = write_file(&out, "heatmap.csv", &csv_bytes(|b| grid.write_csv(b))?)?;
    write_file(&out, "heatmap.svg", grid.to_svg().as_bytes())?;
    let filled = grid.cells.iter().flatten().filter(|c| c.is_some()).count();
    Ok(format!(
        "heatmap: {} x {} grid, {filled} cells filled -> {} (+ .svg)",
        grid.rows.len(),
        grid.cols.len(),
        p.display()
    ))
}

fn synthetic(s: &Settings, a: &SyntheticArgs) -> CliResult<String> {
    let mut spec = SyntheticSpec::default();
    spec.sentences = s.or("sentences", &a.sentences, spec.sentences)?;
    spec.trigger_prob = s.or("trigger-prob", &a.trigger_prob, spec.trigger_prob)?;
    spec.max_entity_len = s.or("max-entity-len", &a.max_entity_len, spec.max_entity_len)?;
    spec.dim = s.or("dim", &a.dim, spec.dim)?;
    if let Some(types) = s.raw("types", &a.types) {
        spec.types = types
            .split(',')
            .map(|p| {
                p.split_once(':')
                    .map(|(e, t)| (e.trim().to_string(), t.trim().to_string()))
                    .ok_or_else(|| CliError::Config(format!("--types: {p:?} is not TYPE:trigger")))
            })
            .collect::<CliResult<_>>()?;
    }
    let seed_value: u64 = s.or("seed", &a.common.seed, 1)?;
    let out = s.out_dir(&a.common)?;
    let data = gen_synthetic(&spec, seed_value).map_err(|e| CliError::Config(e.to_string()))?;
    data.write_to(&out)?;
    Ok(format!(
        "gen-synthetic: {}/{}/{} train/dev/test sentences, {} words, dim {} -> {}",
        data.train.len(),
        data.dev.len(),
        data.test.len(),
        data.embeddings.vocab_len(),
        spec.dim,
        out.display()
    ))
}
