//! The `cgr` command line.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! data errors. Failures end with one JSON line `{code, message, context}`
//! on standard error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::corpus::{write_jsonl, Corpus, FactId};
use crate::error::{DataError, Error};
use crate::explain::explain;
use crate::retriever::embeddings::Embeddings;
use crate::retriever::{retrieve, HashingEncoder, VectorIndex};
use crate::semgraph::GraphConfig;
use crate::synthetic::{generate, SyntheticConfig};
use crate::trainer::{
    evaluate, log_to_jsonl, make_hypothesis, prepare, read_dataset, run_pipeline, train, ChoiceRun, Mode, Model,
    PipelineState, QaInstance, TrainConfig,
};

#[derive(Parser, Debug)]
#[command(name = "cgr", about = "Chain-guided retrieval for multiple-choice QA", arg_required_else_help = true)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic benchmark: facts.jsonl, facts.cgrv, train.jsonl, dev.jsonl.
    GenSynthetic(GenArgs),
    /// Embed a corpus with the seeded hashing encoder.
    IndexBuild(IndexArgs),
    /// Same as index-build.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Print the hypothesis of every choice.
    Hypo(HypoArgs),
    /// Run beam retrieval for one hypothesis and print the beams and pool.
    Retrieve(RetrieveArgs),
    /// Print the semantic graph of one choice as DOT.
    Graph(QuestionArgs),
    /// Print the reasoning chains of one choice as JSON.
    Chains(QuestionArgs),
    /// Train the query encoder and reader; writes model.json, metrics.jsonl
    /// and config.toml under --out.
    Train(TrainArgs),
    /// Accuracy, retrieval accuracy and chain statistics.
    Eval(EvalArgs),
    /// Chain table for one choice; the DOT graph goes to --out or follows the
    /// table.
    Explain(QuestionArgs),
}

#[derive(Subcommand, Debug)]
enum IndexAction {
    Build(IndexArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// TOML file with training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Beam width.
    #[arg(long)]
    k: Option<usize>,
    /// Retrieval iterations.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    n_chains: Option<usize>,
    #[arg(long)]
    max_evidence: Option<usize>,
    /// supervised+distant or distant-only.
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Args, Debug)]
struct Inputs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Extra index searched on the first retrieval step only.
    #[arg(long)]
    openbook: Option<PathBuf>,
    /// Trained model; the initial model when absent.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    questions: usize,
    #[arg(long, default_value_t = 4)]
    choices: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output embedding file.
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct HypoArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    question: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Query text; otherwise the hypothesis of --question/--choice.
    #[arg(long, conflicts_with_all = ["dataset", "question"])]
    query: Option<String>,
    #[arg(long, required_unless_present = "query")]
    dataset: Option<PathBuf>,
    #[arg(long, required_unless_present = "query")]
    question: Option<String>,
    #[arg(long)]
    choice: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QuestionArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    question: String,
    /// Choice index; the gold choice when absent.
    #[arg(long)]
    choice: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Evaluated after every epoch.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Failure {
    #[serde(skip)]
    exit: i32,
    code: &'static str,
    message: String,
    context: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            exit: 1,
            code: "usage",
            message: message.into(),
            context: String::new(),
        }
    }

    fn at(mut self, context: &Path) -> Self {
        if self.context.is_empty() {
            self.context = context.display().to_string();
        }
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let context = match &e {
            Error::Instance { id, .. } => format!("instance {id}"),
            _ => String::new(),
        };
        let (exit, code) = match e.root() {
            Error::Config(_) => (1, "config"),
            Error::Amr(_) => (2, "amr"),
            Error::Graph(_) => (2, "graph"),
            Error::Retrieval(_) => (2, "retrieval"),
            Error::Loss(_) => (2, "loss"),
            Error::Data(_) => (2, "data"),
            Error::UnknownQuestion(_) => (2, "unknown_question"),
            Error::Instance { .. } => unreachable!("root strips instance context"),
        };
        Failure {
            exit,
            code,
            message: e.root().to_string(),
            context,
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e).into()
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{text}");
                return 0;
            }
            let _ = write!(err, "{text}");
            let message = if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                "missing subcommand".to_string()
            } else {
                text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string()
            };
            return report(err, Failure::usage(message));
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return report(err, Failure::usage("--threads must be at least 1"));
        }
        // a pool that is already set up (e.g. under a test harness) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(f) => report(err, f),
    }
}

fn report(err: &mut dyn Write, f: Failure) -> i32 {
    let line = serde_json::to_string(&f).expect("failure serializes");
    let _ = writeln!(err, "{line}");
    f.exit
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Outcome<()> {
    match cmd {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::IndexBuild(a) | Command::Index { action: IndexAction::Build(a) } => index_build(a),
        Command::Hypo(a) => hypo(a, out),
        Command::Retrieve(a) => retrieve_cmd(a, out),
        Command::Graph(a) => graph_cmd(a, out),
        Command::Chains(a) => chains_cmd(a, out),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Explain(a) => explain_cmd(a, out),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome<()> {
    let write = || -> std::io::Result<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        fs::create_dir_all(dir)?;
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    };
    write().map_err(|e| Failure::from(e).at(path))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::from(e).at(path))
}

fn load_corpus(path: &Path) -> Outcome<Corpus> {
    Corpus::read_jsonl(open(path)?).map_err(|e| Failure::from(e).at(path))
}

fn load_index(path: &Path, corpus: &Corpus) -> Outcome<VectorIndex> {
    let emb = Embeddings::read(open(path)?).map_err(|e| Failure::from(e).at(path))?;
    emb.to_index(corpus).map_err(|e| Failure::from(e).at(path))
}

fn load_dataset(path: &Path) -> Outcome<Vec<QaInstance>> {
    read_dataset(open(path)?).map_err(|e| Failure::from(e).at(path))
}

fn load_config(a: &ConfigArgs) -> Outcome<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::from(e).at(p))?;
            TrainConfig::from_toml(&text).map_err(|e| Failure::from(e).at(p))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.k {
        cfg.k_beam = v;
    }
    if let Some(v) = a.t {
        cfg.t_max = v;
    }
    if let Some(v) = a.n_chains {
        cfg.n_chains = v;
    }
    if let Some(v) = a.max_evidence {
        cfg.max_evidence = v;
    }
    if let Some(v) = a.mode {
        cfg.mode = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_model(path: Option<&Path>, cfg: &TrainConfig) -> Outcome<Model> {
    let Some(path) = path else {
        return Ok(Model::init(cfg));
    };
    let model: Model = serde_json::from_reader(open(path)?)
        .map_err(|e| Failure::from(DataError::Invalid(format!("model: {e}"))).at(path))?;
    let enc = &model.encoder;
    if enc.buckets() != cfg.buckets
        || enc.weights().len() != cfg.buckets * cfg.dim
        || model.reader.weight.len() != cfg.reader_dim
    {
        return Err(Failure::from(Error::Config(
            "model shape does not match buckets, dim and reader_dim of the config".into(),
        ))
        .at(path));
    }
    Ok(model)
}

fn find_question(data: Vec<QaInstance>, id: &str) -> Outcome<QaInstance> {
    data.into_iter()
        .find(|q| q.id == id)
        .ok_or_else(|| Error::UnknownQuestion(id.to_string()).into())
}

fn pick_choice(inst: &QaInstance, choice: Option<usize>) -> Outcome<usize> {
    let j = choice.unwrap_or(inst.gold_idx);
    if j >= inst.choices.len() {
        return Err(Failure::usage(format!(
            "--choice {j} out of range; question {} has {} choices",
            inst.id,
            inst.choices.len()
        )));
    }
    Ok(j)
}

fn gen_synthetic(a: GenArgs) -> Outcome<()> {
    let cfg = SyntheticConfig {
        questions: a.questions,
        choices: a.choices,
        seed: a.seed.unwrap_or(SyntheticConfig::default().seed),
        ..Default::default()
    };
    let b = generate(&cfg).map_err(|e| match e {
        Error::Data(DataError::Invalid(m)) => Failure::usage(m),
        e => e.into(),
    })?;
    let corpus = b.corpus()?;
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf)?;
    write_atomic(&a.out.join("facts.jsonl"), &buf)?;
    buf.clear();
    b.embeddings.write(&mut buf)?;
    write_atomic(&a.out.join("facts.cgrv"), &buf)?;
    for (name, set) in [("train.jsonl", &b.train), ("dev.jsonl", &b.dev)] {
        buf.clear();
        write_jsonl(&mut buf, set)?;
        write_atomic(&a.out.join(name), &buf)?;
    }
    Ok(())
}

fn index_build(a: IndexArgs) -> Outcome<()> {
    let cfg = load_config(&a.cfg)?;
    let corpus = load_corpus(&a.corpus)?;
    let enc = HashingEncoder::seeded(cfg.buckets, cfg.dim, cfg.encoder_seed);
    let mut buf = Vec::new();
    Embeddings::from_corpus(&corpus, &enc).write(&mut buf)?;
    write_atomic(&a.embeddings, &buf)
}

#[derive(Serialize)]
struct HypoLine<'a> {
    id: &'a str,
    choice_idx: usize,
    hypothesis: String,
}

fn hypo(a: HypoArgs, out: &mut dyn Write) -> Outcome<()> {
    let mut data = load_dataset(&a.dataset)?;
    if let Some(id) = &a.question {
        data = vec![find_question(data, id)?];
    }
    let mut text = String::new();
    for q in &data {
        for (j, c) in q.choices.iter().enumerate() {
            let line = HypoLine {
                id: &q.id,
                choice_idx: j,
                hypothesis: make_hypothesis(&q.question, c),
            };
            text.push_str(&serde_json::to_string(&line).expect("serializes"));
            text.push('\n');
        }
    }
    emit(out, a.out.as_deref(), &text)
}

struct Loaded {
    cfg: TrainConfig,
    corpus: Corpus,
    index: VectorIndex,
    extra: Option<VectorIndex>,
    model: Model,
}

fn load_inputs(inputs: &Inputs, cfg: &ConfigArgs) -> Outcome<Loaded> {
    let cfg = load_config(cfg)?;
    let corpus = load_corpus(&inputs.corpus)?;
    let index = load_index(&inputs.embeddings, &corpus)?;
    let extra = inputs
        .openbook
        .as_deref()
        .map(|p| load_index(p, &corpus))
        .transpose()?;
    if index.dim() != cfg.dim || extra.as_ref().is_some_and(|x| x.dim() != cfg.dim) {
        return Err(Error::Config(format!("evidence vectors must have dim {} to match the encoder", cfg.dim)).into());
    }
    let model = load_model(inputs.model.as_deref(), &cfg)?;
    Ok(Loaded {
        cfg,
        corpus,
        index,
        extra,
        model,
    })
}

fn retrieve_cmd(a: RetrieveArgs, out: &mut dyn Write) -> Outcome<()> {
    let l = load_inputs(&a.inputs, &a.cfg)?;
    let query = match (&a.query, &a.dataset, &a.question) {
        (Some(q), _, _) => q.clone(),
        (None, Some(d), Some(id)) => {
            let inst = find_question(load_dataset(d)?, id)?;
            let j = pick_choice(&inst, a.choice)?;
            make_hypothesis(&inst.question, &inst.choices[j])
        }
        _ => return Err(Failure::usage("give --query or --dataset with --question")),
    };
    let r = retrieve(&query, &l.index, &l.model.encoder, &l.cfg.retrieve_config(), l.extra.as_ref())
        .map_err(Error::from)?;
    emit(out, a.out.as_deref(), &to_json(&r))
}

/// Full pipeline for one choice of one question.
fn run_choice(a: &QuestionArgs) -> Outcome<(QaInstance, usize, ChoiceRun)> {
    let l = load_inputs(&a.inputs, &a.cfg)?;
    let mut inst = find_question(load_dataset(&a.dataset)?, &a.question)?;
    let j = pick_choice(&inst, a.choice)?;
    if l.cfg.mode == Mode::DistantOnly {
        inst.gold_chain = None;
    }
    let p = prepare(inst.clone(), &l.corpus)?;
    let graph = GraphConfig::default();
    let state = PipelineState {
        corpus: &l.corpus,
        index: &l.index,
        extra: l.extra.as_ref(),
        retrieve: l.cfg.retrieve_config(),
        chains: l.cfg.chain_config(),
        graph: &graph,
    };
    let run = run_pipeline(&p, j, &state, &l.model.encoder)?;
    Ok((inst, j, run))
}

fn graph_cmd(a: QuestionArgs, out: &mut dyn Write) -> Outcome<()> {
    let (_, _, run) = run_choice(&a)?;
    emit(out, a.out.as_deref(), &crate::dot::to_dot(&run.graph, &run.chains))
}

#[derive(Serialize)]
struct ChainReport<'a> {
    question_id: &'a str,
    choice_idx: usize,
    chains: Vec<&'a [FactId]>,
    active_facts: Vec<&'a FactId>,
}

fn chains_cmd(a: QuestionArgs, out: &mut dyn Write) -> Outcome<()> {
    let (inst, j, run) = run_choice(&a)?;
    let report = ChainReport {
        question_id: &inst.id,
        choice_idx: j,
        chains: run.chains.chains.iter().map(|c| c.facts.as_slice()).collect(),
        active_facts: run.chains.active_facts.iter().collect(),
    };
    emit(out, a.out.as_deref(), &to_json(&report))
}

fn explain_cmd(a: QuestionArgs, out: &mut dyn Write) -> Outcome<()> {
    let (_, j, run) = run_choice(&a)?;
    let e = explain(&run.graph, &run.chains, j);
    match &a.out {
        Some(p) => {
            write_atomic(p, e.dot.as_bytes())?;
            writeln!(out, "{}", e.table)?;
        }
        None => write!(out, "{}\n\n{}", e.table, e.dot)?,
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Outcome<()> {
    let cfg = load_config(&a.cfg)?;
    let corpus = load_corpus(&a.corpus)?;
    let index = load_index(&a.embeddings, &corpus)?;
    let train_set = load_dataset(&a.dataset)?;
    let dev = a.dev.as_deref().map(load_dataset).transpose()?;
    let result = train(&train_set, dev.as_deref(), &corpus, &index, &cfg)?;
    let model = serde_json::to_vec(&result.model).expect("model serializes");
    write_atomic(&a.out.join("model.json"), &model)?;
    write_atomic(&a.out.join("metrics.jsonl"), log_to_jsonl(&result.log).as_bytes())?;
    let toml = toml::to_string(&cfg).expect("config serializes");
    write_atomic(&a.out.join("config.toml"), toml.as_bytes())
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> Outcome<()> {
    let l = load_inputs(&a.inputs, &a.cfg)?;
    let mut data = load_dataset(&a.dataset)?;
    if l.cfg.mode == Mode::DistantOnly {
        for q in &mut data {
            q.gold_chain = None;
        }
    }
    let (metrics, _) = evaluate(&data, &l.model, &l.corpus, &l.index, &l.cfg)?;
    emit(out, a.out.as_deref(), &to_json(&metrics))
}
