//! `dmn`: generate tasks, train and evaluate models, check gradients and
//! dump attention gates.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dmn::autodiff::OpKind;
use dmn::check::{check_model, CheckInput};
use dmn::data::{generate_task, read_babi_file, serialize_babi, Context as ExampleContext, Example, TaskFamily, TaskSpec};
use dmn::episodic::EpisodicConfig;
use dmn::eval::{consensus_accuracy, evaluate};
use dmn::model::{InputKind, ModelConfig, Readout, Variant};
use dmn::train::{fit_with, EpochRecord, TrainConfig};

#[derive(Parser)]
#[command(name = "dmn", version, about = "Dynamic memory networks for question answering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bAbI-style task as train/test files
    Generate(GenerateArgs),
    /// Train a model and write manifest, checkpoint and epoch report
    Train(TrainArgs),
    /// Score a checkpoint on a dataset
    Eval(EvalArgs),
    /// Compare backpropagated gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Write per-pass attention gates as CSV
    Gates(GatesArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// single_fact, two_fact, yes_no or counting
    #[arg(long)]
    family: String,
    /// Training examples
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Test examples
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    locations: Option<usize>,
    #[arg(long)]
    objects: Option<usize>,
    /// Sentences per story
    #[arg(long)]
    story_len: Option<usize>,
    /// Output directory; files are named <family>_train.txt and <family>_test.txt
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ReadoutArg {
    Memory,
    QuestionOnly,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data: bAbI text, or JSON lines for image questions
    #[arg(long, required_unless_present = "manifest")]
    data: Option<PathBuf>,
    /// Optional held-out set evaluated after training
    #[arg(long)]
    test: Option<PathBuf>,
    /// odmn, dmn2, dmn3 or dmn+
    #[arg(long, default_value = "dmn+")]
    variant: String,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 256)]
    max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = 1e-5)]
    l2: f64,
    /// Dropout keep probability
    #[arg(long, default_value_t = 0.9)]
    keep_p: f64,
    /// Hidden size d
    #[arg(long, default_value_t = 80)]
    hidden: usize,
    /// Episodic passes T
    #[arg(long, default_value_t = 3)]
    passes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 70)]
    sentence_limit: usize,
    /// Independent initializations; the lowest validation loss wins
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, value_enum, default_value = "memory")]
    readout: ReadoutArg,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Re-run exactly what a previous manifest describes; other flags are ignored
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Exact,
    VqaConsensus,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    metric: Metric,
    /// Write metrics JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Fusion,
    WordGru,
    Visual,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorruptOp {
    Matvec,
    Add,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
    Abs,
    Softmax,
    Concat,
}

impl CorruptOp {
    fn kind(self) -> OpKind {
        match self {
            CorruptOp::Matvec => OpKind::MatVec,
            CorruptOp::Add => OpKind::Add,
            CorruptOp::Mul => OpKind::Mul,
            CorruptOp::Sigmoid => OpKind::Sigmoid,
            CorruptOp::Tanh => OpKind::Tanh,
            CorruptOp::Relu => OpKind::Relu,
            CorruptOp::Abs => OpKind::Abs,
            CorruptOp::Softmax => OpKind::Softmax,
            CorruptOp::Concat => OpKind::Concat,
        }
    }
}

#[derive(Args)]
struct GradcheckArgs {
    /// Check one preset instead of every episodic configuration
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, value_enum, default_value = "all")]
    input: InputArg,
    #[arg(long, default_value_t = 3)]
    passes: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Debugging aid: double the backward rule of one operation
    #[arg(long, value_enum, hide = true)]
    corrupt: Option<CorruptOp>,
}

#[derive(Args)]
struct GatesArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Everything needed to repeat a training run.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    variant: Variant,
    model: ModelConfig,
    train: TrainConfig,
    restarts: usize,
    data: PathBuf,
    test: Option<PathBuf>,
    out: PathBuf,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    restart: usize,
    #[serde(flatten)]
    record: &'a EpochRecord,
}

/// Errors in how the command was invoked rather than in the work itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_dataset(path: &Path) -> Result<Vec<Example>> {
    if !path.exists() {
        return Err(usage(format!("dataset not found: {}", path.display())));
    }
    let examples = if path.extension().is_some_and(|e| e == "jsonl") {
        dmn::data::vqa::read_vqa_file(path)
    } else {
        read_babi_file(path)
    }
    .with_context(|| format!("reading {}", path.display()))?;
    if examples.is_empty() {
        bail!("{} contains no questions", path.display());
    }
    Ok(examples)
}

fn load_checkpoint(path: &Path) -> Result<dmn::Model> {
    if !path.exists() {
        return Err(usage(format!("checkpoint not found: {}", path.display())));
    }
    dmn::checkpoint::load(path).with_context(|| format!("loading {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let family: TaskFamily = args.family.parse().map_err(|e: dmn::Error| usage(e.to_string()))?;
    let defaults = TaskSpec::new(family);
    let spec = TaskSpec {
        entities: args.entities.unwrap_or(defaults.entities),
        locations: args.locations.unwrap_or(defaults.locations),
        objects: args.objects.unwrap_or(defaults.objects),
        story_len: args.story_len.unwrap_or(defaults.story_len),
        train: args.n,
        test: args.n_test,
        seed: args.seed,
        ..defaults
    };
    let (train, test) = generate_task(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (split, examples) in [("train", &train), ("test", &test)] {
        let path = args.out.join(format!("{family}_{split}.txt"));
        fs::write(&path, serialize_babi(examples)?).with_context(|| format!("writing {}", path.display()))?;
        println!("{}: {} questions", path.display(), examples.len());
    }
    Ok(())
}

fn manifest_from_args(args: &TrainArgs, examples: &[Example]) -> Result<RunManifest> {
    let variant: Variant = args.variant.parse().map_err(|e: dmn::Error| usage(e.to_string()))?;
    let train = TrainConfig {
        lr: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        patience: args.patience,
        l2_strength: args.l2,
        dropout_keep_p: args.keep_p,
        hidden: args.hidden,
        passes: args.passes,
        seed: args.seed,
        sentence_limit: args.sentence_limit,
    };
    train.validate().map_err(|e| usage(e.to_string()))?;
    let mut model = variant.config(args.hidden, args.passes, args.sentence_limit);
    model.readout = match args.readout {
        ReadoutArg::Memory => Readout::Memory,
        ReadoutArg::QuestionOnly => Readout::QuestionOnly,
    };
    if let ExampleContext::Grid { grid, .. } = &examples[0].context {
        model.input = InputKind::Visual {
            channels: grid.channels,
        };
    }
    Ok(RunManifest {
        variant,
        model,
        train,
        restarts: args.restarts,
        data: args.data.clone().expect("required by clap"),
        test: args.test.clone(),
        out: args.out.clone(),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn train(args: TrainArgs) -> Result<()> {
    let manifest = match &args.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunManifest>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let examples = load_dataset(args.data.as_deref().expect("required by clap"))?;
            manifest_from_args(&args, &examples)?
        }
    };
    if manifest.restarts == 0 {
        return Err(usage("--restarts must be at least 1"));
    }
    let examples = load_dataset(&manifest.data)?;
    fs::create_dir_all(&manifest.out).with_context(|| format!("creating {}", manifest.out.display()))?;
    write_json(&manifest.out.join("manifest.json"), &manifest)?;

    let report_path = manifest.out.join("report.jsonl");
    let mut report = BufWriter::new(
        fs::File::create(&report_path).with_context(|| format!("creating {}", report_path.display()))?,
    );
    let mut write_err = None;
    let fitted = fit_with(manifest.model, &examples, &manifest.train, manifest.restarts, |restart, record| {
        eprintln!(
            "restart {} epoch {:>3}  train_loss {:.4}  val_loss {:.4}  val_acc {:.3}",
            restart + 1,
            record.epoch,
            record.train_loss,
            record.val_loss,
            record.val_acc
        );
        let line = serde_json::to_string(&ReportLine { restart, record }).expect("plain data");
        if let Err(e) = writeln!(report, "{line}") {
            write_err.get_or_insert(e);
        }
    });
    report.flush()?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", report_path.display()));
    }
    let (model, reports) = fitted?;
    let ckpt = manifest.out.join("model.ckpt");
    dmn::checkpoint::save(&model, &ckpt)?;
    let best = reports
        .iter()
        .min_by(|a, b| a.best_val_loss.total_cmp(&b.best_val_loss))
        .expect("at least one restart");
    println!(
        "best: seed {} epoch {} val_loss {:.4}; checkpoint {}",
        best.seed,
        best.best_epoch,
        best.best_val_loss,
        ckpt.display()
    );
    if let Some(test) = &manifest.test {
        let eval = evaluate(&model, &load_dataset(test)?)?;
        println!("test accuracy {:.4}", eval.accuracy);
    }
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    metric: &'static str,
    value: f64,
    examples: usize,
}

fn eval(args: EvalArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let examples = load_dataset(&args.data)?;
    let metrics = match args.metric {
        Metric::Exact => Metrics {
            metric: "exact",
            value: evaluate(&model, &examples)?.accuracy,
            examples: examples.len(),
        },
        Metric::VqaConsensus => Metrics {
            metric: "vqa_consensus",
            value: consensus_accuracy(&model, &examples)?,
            examples: examples.len(),
        },
    };
    match &args.out {
        Some(path) => write_json(path, &metrics),
        None => {
            println!("{}", serde_json::to_string(&metrics)?);
            Ok(())
        }
    }
}

fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let configs: Vec<EpisodicConfig> = match &args.variant {
        Some(v) => {
            let v: Variant = v.parse().map_err(|e: dmn::Error| usage(e.to_string()))?;
            vec![v.episodic(args.passes)]
        }
        None => EpisodicConfig::all(args.passes),
    };
    let inputs: Vec<CheckInput> = match args.input {
        InputArg::Fusion => vec![CheckInput::Fusion],
        InputArg::WordGru => vec![CheckInput::WordGru],
        InputArg::Visual => vec![CheckInput::Visual],
        InputArg::All => CheckInput::ALL.to_vec(),
    };
    let fault = args.corrupt.map(CorruptOp::kind);
    let mut failed = 0;
    for input in &inputs {
        for config in &configs {
            let report = check_model(*input, *config, args.eps, args.tol, fault, args.seed)?;
            println!(
                "{input:<8} {:?}/{:?}/{:?} T={}  {report}",
                config.attention, config.update, config.weights, config.passes
            );
            if !report.passed() {
                failed += 1;
            }
        }
    }
    let total = inputs.len() * configs.len();
    if failed > 0 {
        bail!("gradient check failed for {failed} of {total} configurations");
    }
    println!("all {total} configurations passed");
    Ok(())
}

fn gates(args: GatesArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    let examples = load_dataset(&args.data)?;
    let rows = dmn::gates::gate_rows(&model, &examples)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    dmn::gates::write_gate_csv(BufWriter::new(file), &rows)?;
    println!("{}: {} rows", args.out.display(), rows.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Gates(a) => gates(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
