//! Command-line front end for the boolicl testbed.
//!
//! Subcommands cover the full experiment lifecycle: `generate`/`teach` write
//! JSONL prompt datasets, `baseline` runs a classical learner over a dataset,
//! `train` runs a meta-training loop into a run directory (manifest, trace,
//! checkpoint, evaluation curves), `eval` re-evaluates a checkpoint,
//! `correlate` estimates a class's pairwise correlation, and `study-samples`
//! sweeps the finite-sample pool grid. Worker threads are capped by the
//! `BOOLICL_THREADS` environment variable.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use boolicl::dataset::{read_jsonl, write_jsonl};
use boolicl::harness::{
    create_run_dir, curve_csv_string, evaluate, evaluate_on, evaluate_teach, finite_sample_study,
    pairwise_correlation, summary_json_string, trace_csv_string, train, write_manifest,
    write_string, EvalReport, LearnerPredictor, ModelPredictor, PromptMode, RunManifest,
    StudyCell, TrainRun, DEFAULT_BATCH_SIZE, DEFAULT_EVAL_PROMPTS, DEFAULT_TRACE_EVERY,
    STUDY_POOL_GRID,
};
use boolicl::learners::by_name;
use boolicl::models::{Arch, ModelConfig, PositionEncoding};
use boolicl::nn::{load_checkpoint, save_checkpoint};
use boolicl::sampler::{
    derive_seed, make_pool, sample_sequence_with_seed, PromptSequence, TaskConfig, TaskKind,
};
use boolicl::teaching::{sample_mixture_with_seed, sample_teach_sequence_with_seed};

#[derive(Parser)]
#[command(name = "boolicl", version, about = "Boolean-function in-context learning testbed")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a prompt dataset and write it as JSON lines.
    Generate(GenerateArgs),
    /// Sample teach-prefixed (or teach/vanilla mixture) prompts.
    Teach(TeachArgs),
    /// Run a classical learner over a JSONL dataset.
    Baseline(BaselineArgs),
    /// Meta-train a sequence model; writes a run directory.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on freshly sampled prompts.
    Eval(EvalArgs),
    /// Estimate the pairwise correlation of a function class.
    Correlate(CorrelateArgs),
    /// Train across the finite-sample pool grid and tabulate accuracy.
    StudySamples(StudyArgs),
}

/// Task selection shared by all subcommands.
#[derive(Args, Clone)]
struct TaskArgs {
    /// Task family (conjunction/conj, disjunction, sparse-disj, dnf3, cnf3,
    /// parity, sparse-parity, majority, threshold01, int-halfspace, nn).
    /// Required unless the subcommand takes a --config file.
    #[arg(long)]
    task: Option<String>,
    /// Input dimension (default: the task's desk-scale dimension).
    #[arg(long)]
    n: Option<usize>,
    /// Points per prompt (default: the task's desk-scale length).
    #[arg(long)]
    m: Option<usize>,
    /// Use the full-size experimental scale instead of the desk scale.
    #[arg(long, default_value_t = false)]
    paper_scale: bool,
    /// Override the per-literal inclusion probability.
    #[arg(long)]
    literal_prob: Option<f64>,
    /// Per-label flip probability stored in the task config.
    #[arg(long)]
    noise_rate: Option<f64>,
    /// Sparsity k for the sparse classes.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Uniform prefix length of the nearest-neighbor task.
    #[arg(long)]
    seed_len: Option<usize>,
}

impl TaskArgs {
    fn config(&self) -> Result<TaskConfig> {
        let Some(task) = &self.task else {
            bail!("--task is required");
        };
        let kind: TaskKind = task.parse().with_context(|| format!("unknown task {task:?}"))?;
        let mut cfg =
            if self.paper_scale { TaskConfig::full(kind) } else { TaskConfig::desk(kind) };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        if let Some(p) = self.literal_prob {
            cfg.literal_prob = p;
        }
        if let Some(r) = self.noise_rate {
            cfg.noise_rate = r;
        }
        if let Some(k) = self.sparsity {
            cfg.sparsity = k;
        }
        if let Some(s) = self.seed_len {
            cfg.seed_len = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Number of prompt sequences.
    #[arg(long, default_value_t = DEFAULT_EVAL_PROMPTS)]
    count: usize,
    /// Master seed; sequence i is derived from (seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TeachArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = DEFAULT_EVAL_PROMPTS)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability that a sequence keeps its teaching prefix; omit for
    /// teach-only prompts.
    #[arg(long)]
    mixture: Option<f64>,
    /// Shuffle points inside each teaching block.
    #[arg(long, default_value_t = false)]
    shuffle: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    /// Learner name: null, avg, knn, knn<k>, pac-conj, pac-disj, gf2.
    #[arg(long)]
    learner: String,
    /// Input JSONL dataset.
    #[arg(long)]
    data: PathBuf,
    /// Accuracy-curve CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ArchArg {
    Transformer,
    Lstm,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PosArg {
    /// Learnable position table.
    Learn,
    /// Fixed sinusoidal absolute positions.
    Abs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Vanilla,
    Teach,
    Mixture,
}

impl From<ModeArg> for PromptMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Vanilla => PromptMode::Vanilla,
            ModeArg::Teach => PromptMode::Teach,
            ModeArg::Mixture => PromptMode::Mixture,
        }
    }
}

/// Model/optimizer flags shared by `train` and `study-samples`.
#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = ArchArg::Transformer)]
    arch: ArchArg,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    dmodel: usize,
    /// Attention heads (transformer only).
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// Position encoding (transformer only).
    #[arg(long, value_enum, default_value_t = PosArg::Learn)]
    pos: PosArg,
    /// Optimizer steps. Required unless the subcommand takes a --config file.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch: usize,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label-flip probability applied to training prompts.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Prompt mode for training batches.
    #[arg(long, value_enum, default_value_t = ModeArg::Vanilla)]
    mode: ModeArg,
    /// Restrict training to a finite pool of this many sequences.
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TRACE_EVERY)]
    trace_every: usize,
}

impl RunArgs {
    fn model(&self, task: &TaskConfig) -> ModelConfig {
        let mut model = match self.arch {
            ArchArg::Transformer => ModelConfig::transformer(task.n, task.m),
            ArchArg::Lstm => ModelConfig::lstm(task.n, task.m),
        };
        model.n_layers = self.layers;
        model.d_model = self.dmodel;
        if self.arch == ArchArg::Transformer {
            model.n_heads = self.heads;
            model.position_encoding = match self.pos {
                PosArg::Learn => PositionEncoding::Learnable,
                PosArg::Abs => PositionEncoding::Sinusoidal,
            };
        }
        model
    }

    fn spec(&self, task: TaskConfig) -> Result<TrainSpec> {
        let Some(steps) = self.steps else {
            bail!("--steps is required");
        };
        let model = self.model(&task);
        Ok(TrainSpec {
            task,
            model,
            steps,
            batch_size: self.batch,
            lr: self.lr,
            seed: self.seed,
            noise_rate: self.noise,
            mode: self.mode.into(),
            pool_size: self.pool_size,
            trace_every: self.trace_every,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    run: RunArgs,
    /// JSON file describing the whole run; overrides every task/model/
    /// optimizer flag when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for run artifacts.
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Run-directory name (default: <task>-<arch>-s<seed>).
    #[arg(long)]
    name: Option<String>,
    /// Post-training evaluation prompts (0 skips evaluation).
    #[arg(long, default_value_t = DEFAULT_EVAL_PROMPTS)]
    eval_count: usize,
    #[arg(long, default_value_t = 1)]
    eval_seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = DEFAULT_EVAL_PROMPTS)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate on teach-prefixed prompts, positions relative to the end of
    /// the teaching block.
    #[arg(long, default_value_t = false)]
    teach: bool,
    /// Accuracy-curve CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 1000)]
    functions: usize,
    #[arg(long, default_value_t = 10000)]
    inputs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated pool sizes (default: the standard grid).
    #[arg(long)]
    pools: Option<String>,
    #[arg(long, default_value_t = 512)]
    eval_count: usize,
    #[arg(long, default_value_t = 7)]
    eval_seed: u64,
    /// Study-table CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// JSON mirror of one training run; the `--config` file holds exactly this.
#[derive(Clone, Serialize, Deserialize)]
struct TrainSpec {
    task: TaskConfig,
    model: ModelConfig,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
    noise_rate: f64,
    mode: PromptMode,
    pool_size: Option<usize>,
    trace_every: usize,
}

impl TrainSpec {
    fn to_run(&self) -> Result<TrainRun> {
        let pool = match self.pool_size {
            Some(size) => {
                Some(make_pool(&self.task, size, derive_seed(self.seed, size as u64))?)
            }
            None => None,
        };
        Ok(TrainRun {
            task: self.task.clone(),
            model: self.model.clone(),
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
            pool,
            noise_rate: self.noise_rate,
            mode: self.mode,
            trace_every: self.trace_every,
        })
    }
}

fn percent(v: f64) -> f64 {
    100.0 * v
}

fn print_report(report: &EvalReport) {
    println!(
        "{} | {} | prompts {} | last-point {:.1}% | mean {:.1}%",
        report.task,
        report.model,
        report.n_eval,
        percent(report.last_point),
        percent(report.mean_over_positions),
    );
}

fn write_curve(path: &Path, report: &EvalReport) -> Result<()> {
    write_string(path, &curve_csv_string(report))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let cfg = args.task.config()?;
    let seqs = (0..args.count as u64)
        .map(|i| sample_sequence_with_seed(&cfg, derive_seed(args.seed, i)))
        .collect::<boolicl::Result<Vec<_>>>()?;
    write_jsonl(&args.out, &seqs)?;
    println!("wrote {} sequences ({} x m={}) to {}", seqs.len(), cfg.task, cfg.m, args.out.display());
    Ok(())
}

fn cmd_teach(args: TeachArgs) -> Result<()> {
    let mut cfg = args.task.config()?;
    cfg.shuffle_teach = args.shuffle;
    if let Some(p) = args.mixture {
        if !(0.0..=1.0).contains(&p) {
            bail!("--mixture must lie in [0, 1], got {p}");
        }
    }
    let seqs = (0..args.count as u64)
        .map(|i| {
            let seed = derive_seed(args.seed, i);
            match args.mixture {
                Some(p) => sample_mixture_with_seed(&cfg, p, seed),
                None => sample_teach_sequence_with_seed(&cfg, seed),
            }
        })
        .collect::<boolicl::Result<Vec<PromptSequence>>>()?;
    write_jsonl(&args.out, &seqs)?;
    let teach_count = seqs.iter().filter(|s| s.teach_len > 0).count();
    println!(
        "wrote {} sequences ({} with teaching prefixes) to {}",
        seqs.len(),
        teach_count,
        args.out.display()
    );
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let learner = by_name(&args.learner)?;
    let prompts = read_jsonl(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let report = evaluate_on(&LearnerPredictor(learner), &prompts)?;
    print_report(&report);
    if let Some(out) = &args.out {
        write_curve(out, &report)?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<TrainSpec>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => args.run.spec(args.task.config()?)?,
    };
    let run = spec.to_run()?;

    let arch = match spec.model.arch {
        Arch::Transformer => "transformer",
        Arch::Lstm => "lstm",
    };
    let name = args
        .name
        .clone()
        .unwrap_or_else(|| format!("{}-{arch}-s{}", spec.task.task, spec.seed));
    let dir = create_run_dir(&args.out_dir, &name)?;
    println!("run directory: {}", dir.display());

    let outcome = train(&run)?;
    println!(
        "trained {} steps in {:.1}s (final loss {:.4})",
        outcome.completed_steps,
        outcome.wall_secs,
        outcome.trace.last().map_or(f64::NAN, |r| r.loss),
    );

    write_string(&dir.join("trace.csv"), &trace_csv_string(&outcome.trace))?;
    let ckpt = dir.join("model.ckpt");
    save_checkpoint(
        &ckpt,
        serde_json::to_value(&spec.model)?,
        outcome.completed_steps as u64,
        serde_json::json!({ "master_seed": spec.seed }),
        &outcome.params,
    )?;
    println!("wrote {}", ckpt.display());

    let manifest = RunManifest::new(serde_json::to_value(&spec)?, spec.seed, outcome.wall_secs);
    write_manifest(&dir, &manifest)?;

    let mut reports = Vec::new();
    if args.eval_count > 0 && outcome.aborted.is_none() {
        let predictor = ModelPredictor::new(spec.model.clone(), outcome.params.clone(), &name);
        let clean_task = TaskConfig { noise_rate: 0.0, ..spec.task.clone() };
        let report = evaluate(&predictor, &clean_task, args.eval_count, args.eval_seed)?;
        print_report(&report);
        write_curve(&dir.join("eval.csv"), &report)?;
        reports.push(report);
        if spec.mode != PromptMode::Vanilla {
            let teach_report =
                evaluate_teach(&predictor, &clean_task, args.eval_count, args.eval_seed)?;
            print_report(&teach_report);
            write_curve(&dir.join("eval_teach.csv"), &teach_report)?;
            reports.push(teach_report);
        }
        write_string(&dir.join("summary.json"), &summary_json_string(&reports)?)?;
    }

    if let Some(reason) = outcome.aborted {
        bail!("training aborted early ({reason}); last finite state saved to {}", ckpt.display());
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<(ModelConfig, boolicl::nn::ParamSet<f32>)> {
    let (header, params) =
        load_checkpoint(path).with_context(|| format!("reading {}", path.display()))?;
    let config: ModelConfig = serde_json::from_value(header.config)
        .context("checkpoint header does not hold a model config")?;
    Ok((config, params))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.task.config()?;
    let (model, params) = load_model(&args.ckpt)?;
    let label = args
        .ckpt
        .file_stem()
        .map_or_else(|| "checkpoint".to_string(), |s| s.to_string_lossy().into_owned());
    let predictor = ModelPredictor::new(model, params, label);
    let report = if args.teach {
        evaluate_teach(&predictor, &cfg, args.count, args.seed)?
    } else {
        evaluate(&predictor, &cfg, args.count, args.seed)?
    };
    print_report(&report);
    if let Some(out) = &args.out {
        write_curve(out, &report)?;
    }
    Ok(())
}

fn cmd_correlate(args: CorrelateArgs) -> Result<()> {
    let cfg = args.task.config()?;
    let est = pairwise_correlation(&cfg, args.functions, args.inputs, args.seed)?;
    println!(
        "{} | correlation {:.1}% +/- {:.2}% | {} pairs x {} inputs",
        est.task,
        percent(est.estimate),
        percent(est.stderr),
        est.n_pairs,
        est.n_inputs,
    );
    Ok(())
}

fn study_csv(cells: &[StudyCell]) -> String {
    let mut s = String::from("pool_size,n,mean_accuracy,stderr\n");
    for c in cells {
        s.push_str(&format!("{},{},{},{}\n", c.pool_size, c.n, c.mean_accuracy, c.stderr));
    }
    s
}

fn cmd_study(args: StudyArgs) -> Result<()> {
    let cfg = args.task.config()?;
    let pools: Vec<usize> = match &args.pools {
        Some(list) => list
            .split(',')
            .map(|tok| tok.trim().parse::<usize>().context("bad --pools entry"))
            .collect::<Result<Vec<_>>>()?,
        None => STUDY_POOL_GRID.to_vec(),
    };
    let spec = args.run.spec(cfg)?;
    let base = spec.to_run()?;
    let cells = finite_sample_study(&base, &pools, args.eval_count, args.eval_seed)?;
    for c in &cells {
        println!(
            "N={:<6} n={} mean accuracy {:.1}% +/- {:.1}%",
            c.pool_size,
            c.n,
            percent(c.mean_accuracy),
            percent(c.stderr),
        );
    }
    if let Some(out) = &args.out {
        write_string(out, &study_csv(&cells))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Generate(args) => cmd_generate(args),
        Cmd::Teach(args) => cmd_teach(args),
        Cmd::Baseline(args) => cmd_baseline(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Correlate(args) => cmd_correlate(args),
        Cmd::StudySamples(args) => cmd_study(args),
    }
}
