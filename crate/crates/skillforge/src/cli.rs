//! Command-line pipeline: extract → train → query/analogy/eval.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 numerical
//! abort. Output files are written to a temporary file in the target
//! directory and renamed into place, so failed runs leave no partial
//! artifacts. Every artifact-producing run also writes
//! `<output>.manifest.json` recording inputs, configuration and seed.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{CorpusError, Vocab};
use crate::eval::{
    append_label, cluster_precision_at_k, generate_synthetic_corpus, load_label_file,
    run_labeling_session, sample_queries, EvalError, LabelPrompt, SyntheticReport, SyntheticSpec,
};
use crate::extractor::{
    extract_corpus_streaming, read_context_records, read_documents, write_context_record,
    ContextRecord, ExtractError, SkillContext,
};
use crate::lexicon::{Lexicon, LexiconError, Normalizer};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::trainer::{train, write_loss_csv, Objective, TrainError, TrainingConfig};
use crate::vectorstore::{
    analogy_with, top_k_with, EmbeddingStore, Metric, Neighbor, StoreError,
};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Io(format!("{}: {source}", path.display()))
}

#[derive(Parser, Debug)]
#[command(
    name = "skillforge",
    version,
    about = "Skill co-occurrence embeddings: extract skills from job posts, train vectors, query neighbors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract per-document skill contexts from a JSON-lines corpus
    Extract(ExtractArgs),
    /// Train skill vectors over extracted contexts
    Train(TrainArgs),
    /// Print the k nearest skills to a query skill
    Query(QueryArgs),
    /// Print the k nearest skills to b - a + c
    Analogy(AnalogyArgs),
    /// Evaluate neighbor relevance with human labels or a synthetic oracle
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Lexicon TSV: canonical<TAB>alias…
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Input corpus: JSON lines with doc_id and text fields
    #[arg(long)]
    pub input: PathBuf,
    /// Output contexts: JSON lines with doc_id and skills fields
    #[arg(long)]
    pub output: PathBuf,
    /// Replacement-dictionary TSV overriding the built-in table
    #[arg(long)]
    pub replacements: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    FullSoftmax,
    NegativeSampling,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::FullSoftmax => Objective::FullSoftmax,
            ObjectiveArg::NegativeSampling => Objective::NegativeSampling,
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    #[default]
    Cosine,
    Dot,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Dot => Metric::Dot,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct TrainKnobs {
    /// Vector dimensionality [default: 100]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Training epochs [default: 5]
    #[arg(long)]
    pub epochs: Option<u32>,
    /// Training objective [default: negative-sampling]
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Negative draws per pair [default: 5]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Minimum document frequency for a skill to enter the vocabulary [default: 5]
    #[arg(long)]
    pub min_count: Option<u32>,
    /// Initial learning rate [default: 0.025]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Final learning rate [default: 0.0001]
    #[arg(long)]
    pub lr_final: Option<f64>,
    /// Seed for all randomness in this run [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training workers; results are bit-reproducible only with 1 [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Extracted contexts (JSON lines)
    #[arg(long)]
    pub contexts: PathBuf,
    /// Output model path; .txt/.vec pick the text format, else binary
    #[arg(long)]
    pub output: PathBuf,
    /// Flat key=value config file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    /// Also write the vocabulary as TSV for audit
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    /// Loss trace CSV path [default: <output>.loss.csv]
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
    /// Also persist the output-side vectors to <output>.wout.sk2v
    #[arg(long)]
    pub include_output: bool,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub skill: String,
    /// Neighbors to return
    #[arg(short, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t)]
    pub metric: MetricArg,
}

#[derive(Args, Debug)]
pub struct AnalogyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The three skills of "a is to b as c is to ?"
    pub a: String,
    pub b: String,
    pub c: String,
    #[arg(short, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t)]
    pub metric: MetricArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Human,
    Synthetic,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Trained model; optional in synthetic mode (one is trained in-process)
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    /// Number of query skills to sample (human mode)
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Seed for sampling, presentation order and in-process training
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Neighbors per query
    #[arg(short, default_value_t = 5)]
    pub k: usize,
    /// Label CSV (query,neighbor,relevant); read and appended to in human mode
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Synthetic corpus spec (JSON)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Report JSON output [default: derived from --labels in human mode]
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit non-zero when the score falls below this threshold
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
}

/// Writes an output file via a sibling temp file and an atomic rename, so
/// failures leave no partial artifact behind.
fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut io::BufWriter<&mut fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(|e| io_err(path, e))?;
    {
        let mut w = io::BufWriter::new(tmp.as_file_mut());
        write(&mut w).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.persist(path)
        .map_err(|e| io_err(path, e.error))
        .map(|_| ())
}

fn write_manifest(manifest: &mut RunManifest, output: &Path) -> Result<(), CliError> {
    let json = manifest.finish_json();
    write_atomic(&manifest_path_for(output), |w| {
        w.write_all(json.as_bytes())?;
        writeln!(w)
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args),
        Command::Query(args) => cmd_query(args),
        Command::Analogy(args) => cmd_analogy(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<(), CliError> {
    let normalizer = match &args.replacements {
        Some(path) => Normalizer::with_replacements_file(path)?,
        None => Normalizer::default(),
    };
    let lexicon = Lexicon::load_with(&args.lexicon, normalizer)?;
    log::info!("loaded {lexicon}");

    let input = fs::File::open(&args.input).map_err(|e| io_err(&args.input, e))?;
    let mut manifest = RunManifest::new("extract");
    manifest.add_input(&args.lexicon).map_err(|e| io_err(&args.lexicon, e))?;
    manifest.add_input(&args.input).map_err(|e| io_err(&args.input, e))?;
    if let Some(r) = &args.replacements {
        manifest.add_input(r).map_err(|e| io_err(r, e))?;
        manifest.config_kv("replacements", r.display());
    }
    manifest.config_kv("lexicon", args.lexicon.display());
    manifest.config_kv("input", args.input.display());
    manifest.config_kv("output", args.output.display());

    let mut summary_out = None;
    write_atomic(&args.output, |w| {
        let summary = extract_corpus_streaming(
            read_documents(BufReader::new(input)),
            &lexicon,
            |context| {
                write_context_record(w, &ContextRecord::from_context(context, &lexicon))
            },
        )
        .map_err(|e| match e {
            ExtractError::Io(source) => source,
            other => io::Error::new(io::ErrorKind::InvalidData, other.to_string()),
        })?;
        summary_out = Some(summary);
        Ok(())
    })?;
    let summary = summary_out.expect("summary recorded on success");
    println!("{}", summary.one_line());
    write_manifest(&mut manifest, &args.output)
}

/// Resolved training settings: defaults, overridden by a config file,
/// overridden by explicit flags.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub config: TrainingConfig,
    pub min_count: u32,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            config: TrainingConfig::default(),
            min_count: 5,
        }
    }
}

impl TrainSettings {
    pub fn resolve(file: Option<&Path>, knobs: &TrainKnobs) -> Result<TrainSettings, CliError> {
        let mut s = TrainSettings::default();
        if let Some(path) = file {
            s.apply_file(path)?;
        }
        let k = knobs;
        if let Some(v) = k.dim {
            s.config.dim = v;
        }
        if let Some(v) = k.epochs {
            s.config.epochs = v;
        }
        if let Some(v) = k.objective {
            s.config.objective = v.into();
        }
        if let Some(v) = k.negatives {
            s.config.negatives = v;
        }
        if let Some(v) = k.min_count {
            s.min_count = v;
        }
        if let Some(v) = k.lr {
            s.config.lr_initial = v;
        }
        if let Some(v) = k.lr_final {
            s.config.lr_final = v;
        }
        if let Some(v) = k.seed {
            s.config.seed = v;
        }
        if let Some(v) = k.workers {
            s.config.workers = v;
        }
        Ok(s)
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| {
                CliError::Validation(format!("{}:{}: {msg}", path.display(), n + 1))
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            let parse_err =
                |what: &str| bad(format!("bad {what} value {value:?}"));
            match key.as_str() {
                "dim" => self.config.dim = value.parse().map_err(|_| parse_err("dim"))?,
                "epochs" => self.config.epochs = value.parse().map_err(|_| parse_err("epochs"))?,
                "objective" => {
                    self.config.objective = match value {
                        "full-softmax" => Objective::FullSoftmax,
                        "negative-sampling" => Objective::NegativeSampling,
                        _ => return Err(parse_err("objective")),
                    }
                }
                "negatives" => {
                    self.config.negatives = value.parse().map_err(|_| parse_err("negatives"))?
                }
                "min-count" => self.min_count = value.parse().map_err(|_| parse_err("min-count"))?,
                "lr" => self.config.lr_initial = value.parse().map_err(|_| parse_err("lr"))?,
                "lr-final" => {
                    self.config.lr_final = value.parse().map_err(|_| parse_err("lr-final"))?
                }
                "seed" => self.config.seed = value.parse().map_err(|_| parse_err("seed"))?,
                "workers" => self.config.workers = value.parse().map_err(|_| parse_err("workers"))?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(())
    }

    fn record(&self, manifest: &mut RunManifest) {
        let c = &self.config;
        manifest.config_kv("dim", c.dim);
        manifest.config_kv("epochs", c.epochs);
        manifest.config_kv("objective", c.objective);
        manifest.config_kv("negatives", c.negatives);
        manifest.config_kv("min-count", self.min_count);
        manifest.config_kv("lr", c.lr_initial);
        manifest.config_kv("lr-final", c.lr_final);
        manifest.config_kv("workers", c.workers);
        manifest.config_kv("config-digest", c.digest());
        manifest.seed = Some(c.seed);
    }
}

/// Reads a contexts file into id-space contexts plus a vocabulary over the
/// canonical strings it contains (ids assigned by first appearance).
pub fn load_contexts_file(
    path: &Path,
    min_count: u32,
) -> Result<(Vec<SkillContext>, Vocab), CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut id_of: HashMap<String, u32> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    let mut contexts = Vec::new();
    for (n, record) in read_context_records(BufReader::new(file)).enumerate() {
        let record = record?;
        let mut skills = Vec::with_capacity(record.skills.len());
        for skill in &record.skills {
            if skill.is_empty() {
                return Err(CliError::Validation(format!(
                    "{}: record {} has an empty skill string",
                    path.display(),
                    n + 1
                )));
            }
            let id = *id_of.entry(skill.clone()).or_insert_with(|| {
                names.push(skill.clone());
                counts.push(0);
                (names.len() - 1) as u32
            });
            if !skills.contains(&id) {
                skills.push(id);
            }
        }
        for &id in &skills {
            counts[id as usize] += 1;
        }
        contexts.push(SkillContext {
            doc_id: record.doc_id,
            skills,
        });
    }
    let vocab = Vocab::from_counts(
        names.into_iter().zip(counts).collect(),
        min_count,
    )?;
    Ok((contexts, vocab))
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let settings = TrainSettings::resolve(args.config.as_deref(), &args.knobs)?;
    settings.config.validate()?;
    let (contexts, vocab) = load_contexts_file(&args.contexts, settings.min_count)?;
    log::info!(
        "vocabulary of {} skills over {} contexts",
        vocab.len(),
        contexts.len()
    );

    let mut manifest = RunManifest::new("train");
    manifest
        .add_input(&args.contexts)
        .map_err(|e| io_err(&args.contexts, e))?;
    manifest.config_kv("contexts", args.contexts.display());
    manifest.config_kv("output", args.output.display());
    settings.record(&mut manifest);

    let outcome = train(&contexts, &vocab, &settings.config)?;
    let store = EmbeddingStore::from_model(&outcome.model)?;
    write_atomic(&args.output, |w| {
        match args.output.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => store.save_text(w),
            _ => store.save_binary(w),
        }
    })?;

    let loss_path = args
        .loss_out
        .clone()
        .unwrap_or_else(|| sibling_with_suffix(&args.output, ".loss.csv"));
    write_atomic(&loss_path, |w| write_loss_csv(w, &outcome.loss_trace))?;

    if let Some(vocab_path) = &args.vocab_out {
        write_atomic(vocab_path, |w| vocab.write_tsv(w))?;
    }
    if args.include_output {
        let wout = EmbeddingStore::from_model_output(&outcome.model)?;
        let wout_path = sibling_with_suffix(&args.output, ".wout.sk2v");
        write_atomic(&wout_path, |w| wout.save_binary(w))?;
    }

    let final_loss = outcome.loss_trace.last().copied().unwrap_or(0.0);
    println!(
        "trained {} skills at dim {} for {} epochs (final mean loss {:.6}); wrote {}",
        vocab.len(),
        settings.config.dim,
        settings.config.epochs,
        final_loss,
        args.output.display()
    );
    write_manifest(&mut manifest, &args.output)
}

fn sibling_with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    name.push_str(suffix);
    path.with_file_name(name)
}

fn print_neighbors(store: &EmbeddingStore, neighbors: &[Neighbor]) {
    for (rank, n) in neighbors.iter().enumerate() {
        println!(
            "{}\t{}\t{:.6}",
            rank + 1,
            store.word(n.index).unwrap_or_default(),
            n.score
        );
    }
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let store = EmbeddingStore::load(&args.model)?;
    let neighbors = top_k_with(
        &args.skill,
        args.k,
        &store,
        &Normalizer::default(),
        args.metric.into(),
    )?;
    print_neighbors(&store, &neighbors);
    Ok(())
}

fn cmd_analogy(args: AnalogyArgs) -> Result<(), CliError> {
    let store = EmbeddingStore::load(&args.model)?;
    let neighbors = analogy_with(
        &args.a,
        &args.b,
        &args.c,
        args.k,
        &store,
        &Normalizer::default(),
        args.metric.into(),
    )?;
    print_neighbors(&store, &neighbors);
    Ok(())
}

/// Interactive labeler: prompts on the terminal and persists every answer
/// to the label file immediately, so a killed session resumes where it
/// stopped.
struct TerminalPrompt {
    labels_path: PathBuf,
}

impl LabelPrompt for TerminalPrompt {
    fn ask(&mut self, query: &str, neighbor: &str, score: f64) -> Result<bool, EvalError> {
        let stdin = io::stdin();
        let mut line = String::new();
        loop {
            print!("{query} -> {neighbor} ({score:.4})  relevant? [y/n] ");
            io::stdout().flush().ok();
            line.clear();
            let n = stdin.lock().read_line(&mut line).map_err(|source| EvalError::Io {
                path: "<stdin>".into(),
                source,
            })?;
            if n == 0 {
                return Err(EvalError::Aborted {
                    reason: "stdin closed mid-session; progress is saved".into(),
                });
            }
            match line.trim().to_lowercase().as_str() {
                "y" | "yes" | "1" => {
                    append_label(&self.labels_path, query, neighbor, true)?;
                    return Ok(true);
                }
                "n" | "no" | "0" => {
                    append_label(&self.labels_path, query, neighbor, false)?;
                    return Ok(false);
                }
                "q" | "quit" => {
                    return Err(EvalError::Aborted {
                        reason: "session stopped by user; progress is saved".into(),
                    })
                }
                _ => println!("please answer y, n or q"),
            }
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    match args.mode {
        EvalMode::Human => cmd_eval_human(args),
        EvalMode::Synthetic => cmd_eval_synthetic(args),
    }
}

fn cmd_eval_human(args: EvalArgs) -> Result<(), CliError> {
    let model_path = args.model.clone().ok_or_else(|| {
        CliError::Validation("human mode requires --model".into())
    })?;
    let labels_path = args.labels.clone().ok_or_else(|| {
        CliError::Validation("human mode requires --labels (created if absent)".into())
    })?;
    let store = EmbeddingStore::load(&model_path)?;
    let queries = sample_queries(&store, args.n, args.seed)?;
    let labels = if labels_path.exists() {
        load_label_file(&labels_path)?
    } else {
        HashMap::new()
    };

    let mut terminal;
    let prompt: Option<&mut dyn LabelPrompt> = if io::stdin().is_terminal() {
        terminal = TerminalPrompt {
            labels_path: labels_path.clone(),
        };
        Some(&mut terminal)
    } else {
        None
    };

    let normalizer = Normalizer::default();
    let report = match run_labeling_session(
        &store,
        &queries,
        args.k,
        args.seed,
        &labels,
        prompt,
        &normalizer,
    ) {
        Ok(report) => report,
        Err(EvalError::MissingLabels { pairs }) => {
            eprintln!("label file {} is incomplete; unlabeled pairs:", labels_path.display());
            for (q, n) in pairs.iter().take(20) {
                eprintln!("  {q},{n},");
            }
            if pairs.len() > 20 {
                eprintln!("  … and {} more", pairs.len() - 20);
            }
            return Err(CliError::Validation(format!(
                "{} unlabeled (query, neighbor) pairs remain",
                pairs.len()
            )));
        }
        Err(e) => return Err(e.into()),
    };

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| sibling_with_suffix(&labels_path, ".report.json"));
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_atomic(&report_path, |w| {
        w.write_all(json.as_bytes())?;
        writeln!(w)
    })?;

    let mut manifest = RunManifest::new("eval");
    manifest.add_input(&model_path).map_err(|e| io_err(&model_path, e))?;
    if labels_path.exists() {
        manifest.add_input(&labels_path).map_err(|e| io_err(&labels_path, e))?;
    }
    manifest.config_kv("mode", "human");
    manifest.config_kv("n", args.n);
    manifest.config_kv("k", args.k);
    manifest.seed = Some(args.seed);
    write_manifest(&mut manifest, &report_path)?;

    let labeled: usize = report
        .queries
        .iter()
        .map(|q| q.neighbors.len())
        .sum();
    println!(
        "relevance_rate: {:.4} over {} labeled neighbors; report: {}",
        report.relevance_rate,
        labeled,
        report_path.display()
    );
    check_threshold(args.threshold, report.relevance_rate, "relevance_rate")
}

fn cmd_eval_synthetic(args: EvalArgs) -> Result<(), CliError> {
    let spec_path = args.spec.clone().ok_or_else(|| {
        CliError::Validation("synthetic mode requires --spec".into())
    })?;
    let spec_text = fs::read_to_string(&spec_path).map_err(|e| io_err(&spec_path, e))?;
    let spec: SyntheticSpec = serde_json::from_str(&spec_text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", spec_path.display())))?;
    let corpus = generate_synthetic_corpus(&spec)?;

    let mut manifest = RunManifest::new("eval");
    manifest.add_input(&spec_path).map_err(|e| io_err(&spec_path, e))?;
    manifest.config_kv("mode", "synthetic");
    manifest.config_kv("k", args.k);
    manifest.config_kv("spec-digest", spec.digest());

    let store = match &args.model {
        Some(path) => {
            manifest.add_input(path).map_err(|e| io_err(path, e))?;
            EmbeddingStore::load(path)?
        }
        None => {
            let mut settings = TrainSettings::resolve(None, &args.knobs)?;
            if args.knobs.seed.is_none() {
                settings.config.seed = args.seed;
            }
            if args.knobs.min_count.is_none() {
                // Synthetic corpora are dense; keep every generated skill.
                settings.min_count = 1;
            }
            settings.record(&mut manifest);
            let vocab = Vocab::build(&corpus.contexts, &corpus.lexicon, settings.min_count)?;
            let outcome = train(&corpus.contexts, &vocab, &settings.config)?;
            EmbeddingStore::from_model(&outcome.model)?
        }
    };

    let normalizer = Normalizer::default();
    let clusters = corpus.clusters_by_canonical();
    let precision = cluster_precision_at_k(&store, &clusters, args.k, &normalizer)?;
    println!("cluster_precision@{}: {:.4}", args.k, precision);

    if let Some(report_path) = &args.report {
        let report = SyntheticReport {
            spec_digest: spec.digest(),
            spec,
            store_digest: store.digest(),
            k: args.k,
            precision,
        };
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        write_atomic(report_path, |w| {
            w.write_all(json.as_bytes())?;
            writeln!(w)
        })?;
        manifest.seed = Some(args.seed);
        write_manifest(&mut manifest, report_path)?;
    }
    check_threshold(args.threshold, precision, "cluster precision")
}

fn check_threshold(threshold: Option<f64>, value: f64, what: &str) -> Result<(), CliError> {
    match threshold {
        Some(t) if value < t => Err(CliError::Validation(format!(
            "{what} {value:.4} is below the required threshold {t}"
        ))),
        _ => Ok(()),
    }
}
