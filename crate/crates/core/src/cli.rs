//! Command-line front end.
//!
//! Every subcommand reads its options from flags and, optionally, from a
//! flat `key = value` config file given with `--config`. Keys before any
//! `[section]` header apply to every subcommand that has a flag of that
//! name; keys under `[align]`, `[train]` and so on apply to that
//! subcommand only. Flags on the command line always win.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::align::{self, AlignConfig};
use crate::assignment::{parse_matrix_csv, solve_assignment};
use crate::dataset::{self, ImageLoading, PairOptions};
use crate::error::{Error, Result};
use crate::eval::{self, Fitted};
use crate::nn::{full_chain, reduced_chain, Architecture, TrainConfig};
use crate::siamese::{self, ScorerSpec, SiameseModel, SiameseScorer, DECISION_THRESHOLD};
use crate::subword::{CanvasSpec, Document};
use crate::synth::{self, CorpusConfig, SynthConfig};

pub const LOG_ENV: &str = "SCRIPTALIGN_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "scriptalign",
    version,
    about = "Subword alignment of handwritten manuscript versions"
)]
#[command(arg_required_else_help = true, args_override_self = true)]
struct Cli {
    /// INI-style config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus or an aligned synthetic pair.
    Synth(SynthArgs),
    /// Build leave-two-out training/validation/test bundles from a corpus.
    Dataset(DatasetArgs),
    /// Train the siamese scorer on a bundle and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a scorer on a bundle, or run the full cross-validation.
    Eval(EvalArgs),
    /// Align two single-manuscript manifests line by line.
    Align(AlignArgs),
    /// Solve the assignment problem for a CSV similarity matrix.
    Assign(AssignArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthMode {
    /// Manuscripts sharing a vocabulary, for dataset building.
    Corpus,
    /// Two versions of one text with ground-truth edits, for alignment.
    Pair,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "corpus")]
    mode: SynthMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "83x69")]
    canvas: CanvasSpec,
    /// Corpus mode: number of manuscripts.
    #[arg(long, default_value_t = 7)]
    manuscripts: usize,
    /// Corpus mode: number of distinct forms.
    #[arg(long, default_value_t = 40)]
    forms: usize,
    /// Corpus mode: occurrences of each form per manuscript.
    #[arg(long, default_value_t = 3)]
    occurrences: usize,
    /// Corpus mode: tokens per line.
    #[arg(long, default_value_t = 12)]
    tokens_per_line: usize,
    /// Corpus mode: render every occurrence identically.
    #[arg(long)]
    no_jitter: bool,
    /// Pair mode: number of lines.
    #[arg(long, default_value_t = 10)]
    lines: usize,
    /// Pair mode: shortest left line.
    #[arg(long, default_value_t = 30)]
    min_tokens: usize,
    /// Pair mode: longest left line.
    #[arg(long, default_value_t = 60)]
    max_tokens: usize,
    #[arg(long, default_value_t = 1_000_000_000)]
    vocab_size: u64,
    #[arg(long, default_value_t = 0.05)]
    p_swap: f64,
    #[arg(long, default_value_t = 0.05)]
    p_insert: f64,
    #[arg(long, default_value_t = 0.05)]
    p_delete: f64,
    #[arg(long, default_value_t = 0.0)]
    p_replace: f64,
    /// Pair mode: write manifests without rendering images.
    #[arg(long)]
    no_images: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Corpus manifest CSV.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Build only this held-out pair, given as `A,B`. Without it every
    /// split is written to its own subdirectory.
    #[arg(long, value_name = "A,B")]
    heldout: Option<String>,
    /// Maximum true-pairs per form.
    #[arg(long, default_value_t = dataset::DEFAULT_CAP_PER_FORM)]
    cap: usize,
    /// Minimum share of a capped form's images from each manuscript.
    #[arg(long, default_value_t = dataset::DEFAULT_MIN_SHARE)]
    min_share: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArchKind {
    /// The full twin: four conv blocks and two 4096-unit dense layers.
    Full,
    /// A short chain for quick runs and small canvases.
    Reduced,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[arg(long, default_value = "83x69")]
    canvas: CanvasSpec,
    #[arg(long, value_enum, default_value = "full")]
    arch: ArchKind,
    /// Scales every filter and unit count.
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.01)]
    init_stddev: f64,
    /// Scale initial weights by sqrt(2 / fan_in) per layer.
    #[arg(long)]
    fan_in_init: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn architecture(&self) -> Result<Architecture> {
        let chain = match self.arch {
            ArchKind::Full => full_chain(),
            ArchKind::Reduced => reduced_chain(),
        };
        Architecture::new(chain, self.canvas, self.multiplier)
    }

    fn train_config(&self) -> Result<TrainConfig> {
        let c = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            init_stddev: self.init_stddev,
            fan_in_init: self.fan_in_init,
            seed: self.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Bundle directory written by `dataset`.
    #[arg(long)]
    bundle: PathBuf,
    /// Checkpoint path; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Evaluate a scorer on one bundle directory.
    #[arg(long, conflicts_with = "cross_validation")]
    bundle: Option<PathBuf>,
    /// Run every leave-two-out split of `--corpus`.
    #[arg(long, requires = "corpus")]
    cross_validation: bool,
    /// Corpus manifest for cross-validation.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// `siamese:<checkpoint>` or `oracle:<flip_probability>`. Required with
    /// `--bundle`; with `--cross-validation` it replaces training.
    #[arg(long)]
    scorer: Option<ScorerSpec>,
    /// Report destination (`-` for stdout).
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Cross-validation: JSON summary path.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Cross-validation: splits run concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = dataset::DEFAULT_CAP_PER_FORM)]
    cap: usize,
    #[arg(long, default_value_t = dataset::DEFAULT_MIN_SHARE)]
    min_share: f64,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// Left manifest (one manuscript).
    #[arg(long)]
    left: PathBuf,
    /// Right manifest (one manuscript).
    #[arg(long)]
    right: PathBuf,
    /// `siamese:<checkpoint>` or `oracle:<flip_probability>`.
    #[arg(long)]
    scorer: ScorerSpec,
    #[arg(long, default_value_t = 5)]
    min_window: usize,
    /// Score at or above which a pair counts as a match.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Extra tokens a window may grow by on each side.
    #[arg(long, default_value_t = 8)]
    max_growth: usize,
    /// JSON ops destination (`-` for stdout).
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Also write a tab-separated export.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Also write a self-contained HTML report.
    #[arg(long)]
    html: Option<PathBuf>,
    /// Image canvas when the scorer does not fix one.
    #[arg(long, default_value = "83x69")]
    canvas: CanvasSpec,
    /// Seeds the oracle's noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AssignArgs {
    /// Matrix CSV, one row per line (`-` for stdin).
    #[arg(long, default_value = "-")]
    matrix: PathBuf,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 for usage errors and 1 for runtime failures.
pub fn main<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let _ =
        env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let args: Vec<OsString> = args.into_iter().collect();
    let args = match with_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("scriptalign: error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("scriptalign: error: {e}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => run_synth(a),
        Command::Dataset(a) => run_dataset(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Align(a) => run_align(a),
        Command::Assign(a) => run_assign(a),
    }
}

/// Splices config-file entries in front of the subcommand's own flags so
/// that later (command-line) occurrences override them.
fn with_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_idx) = subcommand_index(&args) else {
        return Ok(args);
    };
    let sub = args[sub_idx].to_string_lossy().into_owned();
    let command = Cli::command();
    let Some(sub_cmd) = command.find_subcommand(&sub) else {
        return Ok(args);
    };

    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut injected = Vec::new();
    for entry in
        parse_config(&text).map_err(|m| Error::InvalidConfig(format!("{}: {m}", path.display())))?
    {
        if entry.section.as_deref().is_some_and(|s| s != sub) {
            continue;
        }
        let flag = entry.key.replace('_', "-");
        let Some(arg) = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(flag.as_str()))
        else {
            if entry.section.is_some() {
                return Err(Error::InvalidConfig(format!(
                    "{}: `{sub}` has no option `{}`",
                    path.display(),
                    entry.key
                )));
            }
            continue;
        };
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{flag}={}", entry.value)));
        } else {
            match entry.value.as_str() {
                "true" | "yes" | "1" => injected.push(OsString::from(format!("--{flag}"))),
                "false" | "no" | "0" => {}
                v => {
                    return Err(Error::InvalidConfig(format!(
                        "{}: `{}` expects true or false, got `{v}`",
                        path.display(),
                        entry.key
                    )))
                }
            }
        }
    }
    let mut out = args[..=sub_idx].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_idx + 1..]);
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if s == "--config" {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ConfigEntry {
    section: Option<String>,
    key: String,
    value: String,
}

fn parse_config(text: &str) -> std::result::Result<Vec<ConfigEntry>, String> {
    let mut section = None;
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        entries.push(ConfigEntry {
            section: section.clone(),
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(entries)
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?;
        return out.flush().map_err(|e| Error::io("<stdout>", e));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_output(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn run_synth(a: SynthArgs) -> Result<()> {
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    match a.mode {
        SynthMode::Corpus => {
            let config = CorpusConfig {
                manuscripts: a.manuscripts,
                forms: a.forms,
                occurrences: a.occurrences,
                tokens_per_line: a.tokens_per_line,
                canvas: a.canvas,
                jitter: !a.no_jitter,
                seed: a.seed,
            };
            let mut docs = synth::generate_corpus(&config)?;
            let manifest = synth::write_corpus(&mut docs, &a.out)?;
            write_json(
                &a.out.join("synth.json"),
                &json!({ "mode": "corpus", "config": config }),
            )?;
            println!("{}", manifest.display());
        }
        SynthMode::Pair => {
            let config = SynthConfig {
                vocab_size: a.vocab_size,
                lines: a.lines,
                tokens_per_line: (a.min_tokens, a.max_tokens),
                p_swap: a.p_swap,
                p_insert: a.p_insert,
                p_delete: a.p_delete,
                p_replace: a.p_replace,
                seed: a.seed,
            };
            let pair = synth::generate_pair(&config)?;
            let mut manifests = Vec::new();
            for (style, mut doc) in [(0, pair.left), (1, pair.right)] {
                let dir = a.out.join(&doc.manuscript_id);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let manifest = if a.no_images {
                    let m = dir.join("manifest.csv");
                    dataset::write_manifest(std::slice::from_ref(&doc), &m)?;
                    m
                } else {
                    synth::attach_images(&mut doc, style, a.canvas, false);
                    synth::write_corpus(std::slice::from_mut(&mut doc), &dir)?
                };
                manifests.push(manifest);
            }
            write_json(
                &a.out.join("truth.json"),
                &serde_json::to_value(&pair.truth)?,
            )?;
            write_json(
                &a.out.join("synth.json"),
                &json!({ "mode": "pair", "config": config, "canvas": a.canvas }),
            )?;
            for m in manifests {
                println!("{}", m.display());
            }
        }
    }
    Ok(())
}

fn parse_heldout(s: &str) -> Result<[String; 2]> {
    match s.split(',').map(str::trim).collect::<Vec<_>>()[..] {
        [x, y] if !x.is_empty() && !y.is_empty() && x != y => Ok([x.to_string(), y.to_string()]),
        _ => Err(Error::InvalidConfig(format!(
            "--heldout expects two distinct ids `A,B`, got `{s}`"
        ))),
    }
}

fn run_dataset(a: DatasetArgs) -> Result<()> {
    let options = PairOptions {
        cap_per_form: a.cap,
        min_share: a.min_share,
    };
    let wanted = a.heldout.as_deref().map(parse_heldout).transpose()?;
    let corpus = dataset::load_corpus(&a.corpus, ImageLoading::CheckOnly)?;
    let plans = dataset::enumerate_split_plans(&corpus, a.seed)?;
    let selected: Vec<_> = match &wanted {
        Some(pair) => {
            let plan = plans
                .iter()
                .find(|p| p.heldout.iter().all(|h| pair.contains(h)))
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("no split holds out {} and {}", pair[0], pair[1]))
                })?;
            vec![plan.clone()]
        }
        None => plans,
    };
    for plan in &selected {
        let bundle = dataset::build_bundle(&corpus, plan, options)?;
        let dir = if wanted.is_some() {
            a.out.clone()
        } else {
            a.out
                .join(format!("{}__{}", plan.heldout[0], plan.heldout[1]))
        };
        dataset::write_bundle(&bundle, &dir)?;
        log::info!(
            "{}: {} train, {} validation, {} test pairs",
            plan.label(),
            bundle.train.len(),
            bundle.validation.len(),
            bundle.test.len()
        );
        println!("{}", dir.display());
    }
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let arch = a.model.architecture()?;
    let config = a.model.train_config()?;
    let bundle = dataset::read_bundle(&a.bundle, a.model.canvas)?;
    let model = SiameseModel::init(arch, &config)?;
    let (best, report) = siamese::train_with_progress(model, &bundle, &config, |epoch, s| {
        log::info!(
            "epoch {epoch}: loss {:.5}, train accuracy {:.4}, validation accuracy {:.4}",
            s.train_loss,
            s.train_accuracy,
            s.validation_accuracy
        );
        ControlFlow::Continue(())
    })?;
    let meta = json!({
        "arch": format!("{:?}", a.model.arch).to_lowercase(),
        "canvas": a.model.canvas,
        "multiplier": a.model.multiplier,
        "train": config,
        "plan": bundle.plan,
        "report": report,
    });
    siamese::save_checkpoint(&best, &a.out, Some(&meta))?;
    println!(
        "best epoch {} with validation accuracy {:.4}; wrote {}",
        report.best_epoch,
        report.best_validation_accuracy,
        a.out.display()
    );
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    if a.cross_validation {
        return run_cross_validation(a);
    }
    let bundle_dir = a.bundle.as_ref().ok_or_else(|| {
        Error::InvalidConfig("eval needs `--bundle` or `--cross-validation`".into())
    })?;
    let spec = a
        .scorer
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("eval --bundle needs `--scorer`".into()))?;
    let (scorer, canvas): (Box<dyn siamese::SimilarityScorer>, CanvasSpec) = match spec {
        ScorerSpec::Siamese(path) => {
            let s = SiameseScorer::from_checkpoint(path)?;
            let canvas = s.model().arch.canvas();
            (Box::new(s), canvas)
        }
        ScorerSpec::Oracle(_) => (spec.build(a.model.seed)?, a.model.canvas),
    };
    let bundle = dataset::read_bundle(bundle_dir, canvas)?;
    let validation = siamese::evaluate(&scorer, &bundle.validation, DECISION_THRESHOLD)?;
    let test = siamese::evaluate(&scorer, &bundle.test, DECISION_THRESHOLD)?;
    write_json(
        &a.out,
        &json!({
            "scorer": scorer.describe(),
            "heldout": bundle.plan.heldout,
            "validation_accuracy": validation,
            "test_accuracy": test,
            "validation_size": bundle.validation.len(),
            "test_size": bundle.test.len(),
        }),
    )
}

fn run_cross_validation(a: EvalArgs) -> Result<()> {
    let manifest = a
        .corpus
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--cross-validation needs `--corpus`".into()))?;
    let options = PairOptions {
        cap_per_form: a.cap,
        min_share: a.min_share,
    };
    let config = a.model.train_config()?;
    let seed = a.model.seed;
    let (report, settings) = match &a.scorer {
        Some(ScorerSpec::Oracle(p)) => {
            let corpus = dataset::load_corpus(manifest, ImageLoading::CheckOnly)?;
            let spec = ScorerSpec::Oracle(*p);
            let report =
                eval::run_cross_validation_with(&corpus, options, seed, a.workers, |bundle| {
                    Ok(Fitted {
                        scorer: spec.build(bundle.plan.seed)?,
                        best_epoch: None,
                    })
                })?;
            (report, json!({ "scorer": format!("oracle:{p}") }))
        }
        Some(ScorerSpec::Siamese(path)) => {
            let fixed = SiameseScorer::from_checkpoint(path)?;
            let corpus =
                dataset::load_corpus(manifest, ImageLoading::Load(fixed.model().arch.canvas()))?;
            let model = fixed.model().clone();
            let report =
                eval::run_cross_validation_with(&corpus, options, seed, a.workers, |_| {
                    Ok(Fitted {
                        scorer: Box::new(SiameseScorer::new(model.clone())),
                        best_epoch: None,
                    })
                })?;
            (
                report,
                json!({ "scorer": format!("siamese:{}", path.display()) }),
            )
        }
        None => {
            let arch = a.model.architecture()?;
            let corpus = dataset::load_corpus(manifest, ImageLoading::Load(a.model.canvas))?;
            let report =
                eval::run_cross_validation(&corpus, &arch, &config, options, seed, a.workers)?;
            let settings = json!({
                "arch": format!("{:?}", a.model.arch).to_lowercase(),
                "canvas": a.model.canvas,
                "multiplier": a.model.multiplier,
                "train": config,
            });
            (report, settings)
        }
    };
    write_output(&a.out, &report.to_csv())?;
    if let Some(path) = &a.summary {
        let full =
            json!({ "corpus": manifest, "options": options, "seed": seed, "model": settings });
        write_output(path, &(report.summary_json(&full)? + "\n"))?;
    }
    Ok(())
}

fn single_document(path: &Path, loading: ImageLoading) -> Result<Document> {
    let corpus = dataset::load_corpus(path, loading)?;
    let mut docs = corpus.documents().to_vec();
    if docs.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "{} holds {} manuscripts; expected exactly one",
            path.display(),
            docs.len()
        )));
    }
    Ok(docs.remove(0))
}

fn run_align(a: AlignArgs) -> Result<()> {
    let config = AlignConfig {
        min_window: a.min_window,
        threshold: a.threshold,
        max_growth: a.max_growth,
    };
    config.validate()?;
    let (scorer, loading): (Box<dyn siamese::SimilarityScorer>, ImageLoading) = match &a.scorer {
        ScorerSpec::Siamese(path) => {
            let s = SiameseScorer::from_checkpoint(path)?;
            let canvas = s.model().arch.canvas();
            (Box::new(s), ImageLoading::Load(canvas))
        }
        spec @ ScorerSpec::Oracle(_) => {
            let loading = if a.html.is_some() {
                ImageLoading::Load(a.canvas)
            } else {
                ImageLoading::CheckOnly
            };
            (spec.build(a.seed)?, loading)
        }
    };
    let left = single_document(&a.left, loading)?;
    let right = single_document(&a.right, loading)?;
    let results = align::align_documents(&left, &right, &config, &scorer)?;
    let ops = align::ops_json(&left, &right, &results);
    write_output(&a.output, &(serde_json::to_string_pretty(&ops)? + "\n"))?;
    if let Some(path) = &a.tsv {
        write_output(path, &align::ops_tsv(&left, &right, &results))?;
    }
    if let Some(path) = &a.html {
        align::write_html(path, &left, &right, &results)?;
    }
    let low = results
        .iter()
        .flat_map(|r| &r.ops)
        .filter(|o| o.low_confidence)
        .count();
    log::info!(
        "aligned {} lines into {} ops ({low} low-confidence)",
        results.len(),
        ops.len()
    );
    Ok(())
}

fn run_assign(a: AssignArgs) -> Result<()> {
    let text = if a.matrix.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::io("<stdin>", e))?;
        s
    } else {
        fs::read_to_string(&a.matrix).map_err(|e| Error::io(&a.matrix, e))?
    };
    let matrix = parse_matrix_csv(&text)?;
    let assignment = solve_assignment(&matrix);
    let pairs: Vec<_> = assignment
        .matches
        .iter()
        .map(|&(r, c)| json!([r, c, matrix.get(r, c)]))
        .collect();
    write_json(
        Path::new("-"),
        &json!({ "matches": pairs, "total_score": assignment.total_score, "inversions": assignment.inversions }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn no_arguments_is_a_usage_error() {
        assert_eq!(main(os(&["scriptalign"])), 2);
        assert_eq!(main(os(&["scriptalign", "frobnicate"])), 2);
        assert_eq!(main(os(&["scriptalign", "assign", "--bogus"])), 2);
    }

    #[test]
    fn config_parsing() {
        let text =
            "# comment\nseed = 4\n\n[align]\nmin_window = 7\n; also comment\nscorer=oracle:0\n";
        let e = parse_config(text).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(
            e[0],
            ConfigEntry {
                section: None,
                key: "seed".into(),
                value: "4".into()
            }
        );
        assert_eq!(e[1].section.as_deref(), Some("align"));
        assert_eq!(e[2].value, "oracle:0");
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn config_entries_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.ini");
        fs::write(
            &cfg,
            "seed = 9\ncanvas = 40x30\n[align]\nmin_window = 7\n[train]\nepochs = 3\n",
        )
        .unwrap();
        let args = os(&[
            "x",
            "--config",
            cfg.to_str().unwrap(),
            "align",
            "--min-window",
            "6",
        ]);
        let out: Vec<String> = with_config(args)
            .unwrap()
            .iter()
            .map(|s| s.to_string_lossy().into_owned())
            .collect();
        assert_eq!(out[3], "align");
        assert!(out.contains(&"--seed=9".to_string()));
        assert!(out.contains(&"--canvas=40x30".to_string()));
        assert!(!out.iter().any(|s| s.starts_with("--epochs")));
        let cli = Cli::try_parse_from(out.iter().map(String::as_str).chain([
            "--left", "a.csv", "--right", "b.csv", "--scorer", "oracle:0",
        ]))
        .unwrap();
        let Command::Align(a) = cli.command else {
            panic!("expected align")
        };
        assert_eq!(a.min_window, 6);
        assert_eq!(a.seed, 9);
    }

    #[test]
    fn unknown_section_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.ini");
        fs::write(&cfg, "[assign]\nwindow = 3\n").unwrap();
        let args = os(&["x", "--config", cfg.to_str().unwrap(), "assign"]);
        assert!(with_config(args.clone()).is_err());
        assert_eq!(main(args), 2);
    }

    #[test]
    fn heldout_parsing() {
        assert_eq!(
            parse_heldout("a, b").unwrap(),
            ["a".to_string(), "b".to_string()]
        );
        assert!(parse_heldout("a").is_err());
        assert!(parse_heldout("a,a").is_err());
    }
}
