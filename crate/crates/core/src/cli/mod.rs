//! Command-line front end. `main.rs` only forwards to [`main_with_args`].
//!
//! Run directory layout (every command that writes one):
//!
//! ```text
//! <out>/config.toml        resolved configuration
//! <out>/seed               the seed, on its own line
//! <out>/command            the invocation that produced the directory
//! <out>/checkpoints/       policy weights with manifests, optimizer state
//! <out>/logs/              loss and training logs (CSV, JSONL)
//! <out>/reports/           metric reports, comparisons, curves
//! ```

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{streams, BackendSection, CriticSection, GrpoSection, LoopSection, RunConfig, SamplerSection, SftSection};

use crate::bench::{compare, emit_curves, evaluate_policy_with_workers, generate_suite, sample_tasks, MetricReport, PromptSuite};
use crate::episode::LoopMode;
use crate::gateway::{plan_to_wire, MockScript, MockServer};
use crate::grpo::{train_until, TrainState, TrainingLog, TrainingRecord};
use crate::microworld::{DomainSpec, Literal};
use crate::numerics::{write_params, OptState, RandomSource};
use crate::planner::Goal;
use crate::worldmodel::{
    demonstrations, init_velocity_net, load_policy, save_policy, sft_train, DemoConfig, FrozenPolicy, LearnedPolicy, OraclePolicy,
    PolicyBundle, PolicyManifest, SegmentPolicy,
};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "closedloop", version, about = "Plan, generate, critique and train world-model policies on symbolic micro-worlds")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bundled domain name or domain TOML path.
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Evaluation threads, capped at the available cores (0 = all).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// `builtin` or `remote`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    /// Environment variable holding the remote bearer token.
    #[arg(long, global = true)]
    pub token_env: Option<String>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a goal from the domain's initial state.
    Plan(PlanArgs),
    /// Supervised flow-matching training on generated demonstrations.
    Sft(SftArgs),
    /// Closed-loop group-relative policy optimization from a checkpoint.
    Grpo(GrpoArgs),
    /// Evaluate a policy on a prompt suite in one loop mode.
    Bench(BenchArgs),
    /// Tabulate metric reports side by side.
    Compare(CompareArgs),
    /// Generate a prompt suite.
    Suite(SuiteArgs),
    /// Serve a scripted mock of the remote planner and critic.
    MockServe(MockServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlanFormat {
    Text,
    Wire,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Literal keys (`jar.lid_removed, !kettle.held`) or phrases joined by "and".
    pub goal: String,
    #[arg(long, value_enum, default_value = "text")]
    pub format: PlanFormat,
}

#[derive(Debug, Args)]
pub struct SftArgs {
    #[arg(long)]
    pub demos: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GrpoArgs {
    /// Supervised checkpoint to start from (also the KL reference).
    #[arg(long, required_unless_present = "resume")]
    pub checkpoint: Option<PathBuf>,
    /// Continue the run in `--out` from its last checkpoint.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `start:max_len` pairs, such as `1:1,101:3,201:5`.
    #[arg(long)]
    pub curriculum: Option<String>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Learned policy checkpoint.
    #[arg(long, conflicts_with_all = ["oracle", "frozen"], required_unless_present_any = ["oracle", "frozen"])]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate the demonstration generator instead.
    #[arg(long)]
    pub oracle: bool,
    /// Evaluate a policy that never moves.
    #[arg(long, conflicts_with = "oracle")]
    pub frozen: bool,
    /// `full`, `inner-only` or `open-loop`.
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: LoopMode,
    /// Suite file written by `suite`; otherwise one is generated.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub suite_seed: u64,
    /// Easy, medium and hard task counts.
    #[arg(long, default_value = "20,20,10", value_parser = parse_counts)]
    pub counts: [usize; 3],
    /// Report name; defaults to `<policy>-<mode>`.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Metric report JSON files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the table as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long, default_value = "20,20,10", value_parser = parse_counts)]
    pub counts: [usize; 3],
    /// Write the suite here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockServeArgs {
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

fn parse_mode(text: &str) -> std::result::Result<LoopMode, String> {
    LoopMode::from_name(text).map_err(|e| e.to_string())
}

fn parse_counts(text: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> =
        text.split(',').map(|p| p.trim().parse::<usize>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    parts.try_into().map_err(|_| "expected three comma-separated counts".to_string())
}

/// Exit status: 0 success, 1 internal failure, 2 bad usage or input.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::DanglingReference(_)
        | Error::DuplicateChannel(_)
        | Error::UnknownOperator(_)
        | Error::PreconditionViolation { .. }
        | Error::NoPlan(_)
        | Error::Checkpoint(_)
        | Error::Config(_)
        | Error::Schema(_)
        | Error::Json(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("CLOSEDLOOP_LOG").try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Plan(a) => cmd_plan(&resolve(&cli.global, None)?, a, cli.global.out.as_deref()),
        Command::Sft(a) => cmd_sft(&resolve(&cli.global, None)?, a),
        Command::Grpo(a) => cmd_grpo(&cli.global, a),
        Command::Bench(a) => cmd_bench(&resolve(&cli.global, None)?, a),
        Command::Compare(a) => cmd_compare(a),
        Command::Suite(a) => cmd_suite(&resolve(&cli.global, None)?, a),
        Command::MockServe(a) => cmd_mock_serve(a),
    }
}

/// Defaults, then the file (`--config`, else `base`), then flags.
fn resolve(g: &GlobalArgs, base: Option<&Path>) -> Result<RunConfig> {
    let mut c = match g.config.as_deref().or(base) {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = &g.domain {
        c.domain = v.clone();
    }
    if let Some(v) = &g.out {
        c.out = v.clone();
    }
    if let Some(v) = g.workers {
        c.workers = v;
    }
    if let Some(v) = &g.backend {
        c.backend.kind = v.clone();
    }
    if let Some(v) = &g.base_url {
        c.backend.base_url = v.clone();
    }
    if let Some(v) = &g.token_env {
        c.backend.token_env = Some(v.clone());
    }
    Ok(c)
}

/// Creates the run directory and records the resolved configuration.
fn open_run_dir(config: &RunConfig) -> Result<PathBuf> {
    let out = config.out.clone();
    for sub in ["checkpoints", "logs", "reports"] {
        std::fs::create_dir_all(out.join(sub))?;
    }
    std::fs::write(out.join("config.toml"), config.to_toml())?;
    std::fs::write(out.join("seed"), format!("{}\n", config.seed))?;
    let argv: Vec<String> = std::env::args().collect();
    std::fs::write(out.join("command"), argv.join(" ") + "\n")?;
    Ok(out)
}

/// Literal keys first; otherwise phrases such as `lid removed and cup full`.
pub fn parse_goal(spec: &DomainSpec, text: &str) -> Result<Goal> {
    if let Ok(goal) = Goal::parse(spec, text) {
        return Ok(goal);
    }
    let mut target = Vec::new();
    for phrase in text.split(" and ").map(str::trim).filter(|p| !p.is_empty()) {
        let lit = (0..spec.predicates.len())
            .flat_map(|p| [true, false].map(|value| Literal { predicate: p, value }))
            .find(|l| spec.literal_phrase(*l) == phrase)
            .ok_or_else(|| Error::InvalidArgument(format!("'{phrase}' is neither a literal key nor a known phrase")))?;
        target.push(lit);
    }
    Goal::new(spec, target)
}

fn cmd_plan(config: &RunConfig, args: &PlanArgs, out: Option<&Path>) -> Result<()> {
    config.validate()?;
    let spec = config.domain()?;
    let goal = parse_goal(&spec, &args.goal)?;
    let planner = config.backend()?.planner()?;
    let plan = planner.plan(&spec, &goal, &spec.initial)?;
    let wire = serde_json::to_string_pretty(&plan_to_wire(&spec, &plan))? + "\n";
    match args.format {
        PlanFormat::Wire => print!("{wire}"),
        PlanFormat::Text => {
            if plan.is_empty() {
                println!("goal '{}' already holds: empty plan", goal.description);
            } else {
                let n = plan.len();
                println!("plan for '{}' ({n} step{}):", goal.description, if n == 1 { "" } else { "s" });
                for s in &plan.steps {
                    println!("  {}. {}", s.sid, s.instruction);
                    println!("     pre:  {}", spec.display_literals(&s.pre));
                    println!("     post: {}", spec.display_literals(&s.post));
                }
            }
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("plan.json"), &wire)?;
    }
    Ok(())
}

fn cmd_sft(base: &RunConfig, args: &SftArgs) -> Result<()> {
    let mut config = base.clone();
    if let Some(v) = args.demos {
        config.sft.demos = v;
    }
    if let Some(v) = args.epochs {
        config.sft.epochs = v;
    }
    if let Some(v) = args.lr {
        config.sft.lr = v;
    }
    config.validate()?;
    let spec = config.domain()?;
    let out = open_run_dir(&config)?;
    let mut rng = RandomSource::new(config.seed, streams::SFT);
    let data = demonstrations(&spec, config.sft.demos, &DemoConfig::default(), &mut rng)?;
    let init = init_velocity_net(&spec, &mut rng)?;
    let report = sft_train(&init, &data, &config.sft_config(), &mut rng)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        csv.push_str(&format!("{},{l:.8}\n", i + 1));
    }
    std::fs::write(out.join("logs/sft_loss.csv"), csv)?;
    let path = out.join("checkpoints/sft.bin");
    save_policy(&path, &report.params, &PolicyManifest::new(&spec, &config.sampler_config(), 0))?;
    match (report.epoch_losses.first(), report.epoch_losses.last()) {
        (Some(a), Some(b)) => println!("sft: {} demos, {} epochs, loss {a:.4} -> {b:.4}", data.len(), config.sft.epochs),
        _ => println!("sft: 0 epochs, checkpoint is the initialization"),
    }
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<TrainingRecord>> {
    std::fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

fn save_training(out: &Path, spec: &DomainSpec, config: &RunConfig, state: &TrainState, log: &TrainingLog) -> Result<()> {
    let ckpt = out.join("checkpoints");
    save_policy(&ckpt.join("policy.bin"), &state.bundle.theta, &PolicyManifest::new(spec, &config.sampler_config(), state.completed))?;
    write_params(&ckpt.join("reference.bin"), &state.bundle.reference)?;
    std::fs::write(ckpt.join("optimizer.json"), serde_json::to_string(&state.opt)? + "\n")?;
    let mut jsonl = String::new();
    for r in &log.records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    std::fs::write(out.join("logs/training.jsonl"), jsonl)?;
    std::fs::write(out.join("logs/events.txt"), log.events.iter().map(|e| format!("{e}\n")).collect::<String>())?;
    if !log.records.is_empty() {
        emit_curves(log, &out.join("reports/curves"))?;
    }
    Ok(())
}

fn cmd_grpo(global: &GlobalArgs, args: &GrpoArgs) -> Result<()> {
    let resume_dir = if args.resume {
        Some(global.out.clone().ok_or_else(|| Error::Config("--resume needs --out pointing at the run to continue".into()))?)
    } else {
        None
    };
    let base_file = resume_dir.as_ref().map(|d| d.join("config.toml"));
    let mut config = resolve(global, base_file.as_deref())?;
    let g = &mut config.grpo;
    if let Some(v) = args.iterations {
        g.iterations = v;
    }
    if let Some(v) = args.group_size {
        g.group_size = v;
    }
    if let Some(v) = args.lr {
        g.lr = v;
    }
    if let Some(v) = args.beta {
        g.beta = v;
    }
    if let Some(v) = &args.curriculum {
        g.curriculum = v.clone();
    }
    if let Some(v) = args.checkpoint_every {
        g.checkpoint_every = v;
    }
    // a resumed run keeps the schedule it started with
    if config.grpo.curriculum.trim().is_empty() {
        config.grpo.curriculum = config.curriculum()?.render();
    }
    config.validate()?;
    let spec = config.domain()?;
    let sampler = config.sampler_config();

    let (mut state, mut log) = match &resume_dir {
        Some(dir) => {
            let ckpt = dir.join("checkpoints");
            let (theta, manifest) = load_policy(&ckpt.join("policy.bin"), &spec, Some(&sampler))?;
            let reference = crate::numerics::read_params(&ckpt.join("reference.bin"))?;
            let opt_text = std::fs::read_to_string(ckpt.join("optimizer.json"))
                .map_err(|e| Error::Checkpoint(format!("cannot read optimizer state: {e}")))?;
            let opt: OptState = serde_json::from_str(&opt_text)?;
            let mut records = read_records(&dir.join("logs/training.jsonl"))?;
            records.truncate(manifest.iteration);
            let bundle = PolicyBundle { theta_old: theta.clone(), theta, reference };
            (TrainState { bundle, opt, completed: manifest.iteration }, TrainingLog { records, events: Vec::new() })
        }
        None => {
            let path = args.checkpoint.as_ref().expect("clap requires a checkpoint without --resume");
            let (theta, _) = load_policy(path, &spec, Some(&sampler))?;
            (TrainState::new(PolicyBundle::from_sft(theta)), TrainingLog::default())
        }
    };
    let grpo = config.grpo_config(&spec)?;
    if state.completed >= grpo.iterations {
        return Err(Error::Config(format!("run already has {} iterations; raise --iterations to continue", state.completed)));
    }
    let out = open_run_dir(&config)?;
    let backend = config.backend()?;
    let planner = backend.planner()?;
    let critic = backend.critic(config.critic_config())?;
    let max_len = grpo.curriculum.levels.last().map(|l| l.1).unwrap_or(1);
    let tasks = sample_tasks(&spec, config.grpo.train_tasks, 1, max_len, &mut RandomSource::new(config.seed, streams::TASKS))?;
    let root = RandomSource::new(config.seed, streams::GRPO);
    let start = state.completed;
    while state.completed < grpo.iterations {
        let until = ((state.completed / config.grpo.checkpoint_every + 1) * config.grpo.checkpoint_every).min(grpo.iterations);
        train_until(&mut state, until, &spec, planner.as_ref(), critic.as_ref(), &tasks, &sampler, &grpo, &root, &mut log)?;
        save_training(&out, &spec, &config, &state, &log)?;
        let last = log.records.last().expect("at least one iteration ran");
        println!("grpo: iteration {until}/{}, reward {:.4}", grpo.iterations, last.mean_reward);
    }
    println!(
        "grpo: iterations {}..{} done; checkpoint {}",
        start + 1,
        state.completed,
        out.join("checkpoints/policy.bin").display()
    );
    Ok(())
}

fn load_suite(spec: &DomainSpec, path: &Path) -> Result<PromptSuite> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    PromptSuite::from_json(spec, &value)
}

fn cmd_bench(config: &RunConfig, args: &BenchArgs) -> Result<()> {
    config.validate()?;
    let spec = config.domain()?;
    let suite = match &args.suite {
        Some(path) => load_suite(&spec, path)?,
        None => generate_suite(&spec, args.suite_seed, args.counts)?,
    };
    let (name, policy): (&str, Box<dyn SegmentPolicy>) = match &args.checkpoint {
        Some(path) => {
            let (params, manifest) = load_policy(path, &spec, None)?;
            ("learned", Box::new(LearnedPolicy { params, sampler: manifest.sampler() }))
        }
        None if args.oracle => ("oracle", Box::new(OraclePolicy::default())),
        None => ("frozen", Box::new(FrozenPolicy)),
    };
    let label = args.label.clone().unwrap_or_else(|| format!("{name}-{}", args.mode.name()));
    let backend = config.backend()?;
    let planner = backend.planner()?;
    let critic = backend.critic(config.critic_config())?;
    let loop_config = match args.mode {
        LoopMode::OpenLoop => crate::episode::LoopConfig { k_retries: 0, max_outer_replans: 0, ..config.loop_config() },
        LoopMode::InnerOnly => crate::episode::LoopConfig { max_outer_replans: 0, ..config.loop_config() },
        LoopMode::Full => config.loop_config(),
    };
    let mut rng = RandomSource::new(config.seed, streams::BENCH);
    let report = evaluate_policy_with_workers(
        &label,
        &spec,
        policy.as_ref(),
        &suite,
        planner.as_ref(),
        critic.as_ref(),
        &loop_config,
        config.resolved_workers(),
        &mut rng,
    )?;
    let out = open_run_dir(config)?;
    std::fs::write(out.join("reports/suite.json"), serde_json::to_string_pretty(&suite.to_json(&spec))? + "\n")?;
    let path = out.join(format!("reports/{label}.json"));
    std::fs::write(&path, report.to_json())?;
    print!("{}", compare(&[(label.clone(), report.clone())])?.to_text());
    if !report.episode_errors.is_empty() {
        eprintln!("{} episodes failed with errors; see {}", report.episode_errors.len(), path.display());
    }
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let reports = args
        .reports
        .iter()
        .map(|p| {
            let r = MetricReport::from_json(&std::fs::read_to_string(p)?)?;
            Ok((r.label.clone(), r))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = compare(&reports)?;
    print!("{}", table.to_text());
    if let Some(path) = &args.csv {
        std::fs::write(path, table.to_csv())?;
    }
    Ok(())
}

fn cmd_suite(config: &RunConfig, args: &SuiteArgs) -> Result<()> {
    let spec = config.domain()?;
    let suite = generate_suite(&spec, config.seed, args.counts)?;
    let text = serde_json::to_string_pretty(&suite.to_json(&spec))? + "\n";
    match &args.output {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("suite {} with {} tasks written to {}", suite.hash(&spec), suite.tasks.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_mock_serve(args: &MockServeArgs) -> Result<()> {
    let script = MockScript::load(&args.script)?;
    let server = MockServer::bind(script, &format!("{}:{}", args.host, args.port))?;
    println!("mock server listening on {}", server.base_url());
    server.wait();
    Ok(())
}
