//! Argument definitions and subcommand drivers for the `searchdepth` binary.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, RunConfig};
use crate::metrics::{aggregate_metrics, MetricsError, MetricsReport};
use crate::policy::{BackendError, PolicyBackend, PolicyKind, PromptError, PromptSet};
use crate::retrieval::{ingest_corpus, CorpusError, RetrievalIndex};
use crate::reward::{classify_step, cumulative_reward_curve, score_trajectory, Ablation, RewardError, StepClass};
use crate::sim::{
    generate_tasks, load_tasks, probe_fixed_depth, run_dataset, EpisodeError, ProbeError, RetrieverSource, RunContext,
    TaskGenError, TaskSet, PROBE_CSV_HEADER,
};
use crate::train::{train, PolicyCheckpoint, TrainError};
use crate::trajectory::{from_json_str, load_dataset, read_trajectories, write_trajectories, Dataset, JsonlError};

const PRECEDENCE: &str = "Configuration precedence, lowest first: built-in defaults, each --config file in order, \
the section files of a subcommand (--env-config, --trainer-config), then explicit flags. A resolved copy is \
written next to every output as <output>.config.json.

Exit codes: 0 success, 2 usage or configuration error, 3 data or schema error, 4 backend transport error, \
1 any other failure.";

#[derive(Debug, Parser)]
#[command(name = "searchdepth", version, about = "Search-depth reward shaping toolkit", after_long_help = PRECEDENCE)]
pub struct Cli {
    /// JSON config file; repeat to layer several.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Vec<PathBuf>,
    /// Root seed for every random component.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results are only guaranteed reproducible with 1.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and print index statistics.
    Ingest(IngestArgs),
    /// Generate synthetic multi-hop tasks with their corpus and dataset.
    Generate(GenerateArgs),
    /// Run a policy over a dataset and write trajectories.
    Rollout(RolloutArgs),
    /// Fill in per-step rewards and t_c.
    Score(ScoreArgs),
    /// Aggregate EM, F1, SD, SE and OSR.
    Eval(EvalArgs),
    /// Force each search depth in turn and tabulate EM and OSR.
    Probe(ProbeArgs),
    /// Cumulative reward against stopping depth.
    Curve(CurveArgs),
    /// Train the parametric policy with PPO.
    Train(TrainArgs),
    /// Metrics plus step counts per efficiency branch, for scored trajectories.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Print a one-line summary instead of the JSON statistics.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub count: Option<usize>,
    /// Comma-separated depths, sampled uniformly.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    #[arg(long)]
    pub distractors: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Where questions and documents come from.
#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Question file; defaults to the questions of --tasks.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Corpus for the lexical retriever.
    #[arg(long, conflicts_with = "tasks")]
    pub corpus: Option<PathBuf>,
    /// Generated tasks file, served by the oracle retriever.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, default_value = "scripted")]
    pub policy: PolicyKind,
    #[arg(long)]
    pub hop_success_prob: Option<f64>,
    #[arg(long)]
    pub extraction_bias: Option<usize>,
    /// Remote endpoint base URL.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
    /// Checkpoint for the parametric policy.
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    /// Take the most likely parametric decision instead of sampling.
    #[arg(long)]
    pub greedy: bool,
    /// Directory with template files overriding the built-in prompts.
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub fixed_depth: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub depths: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Comma-separated capability depths, one column each.
    #[arg(long = "t-c", value_delimiter = ',', required = true)]
    pub t_c: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    /// Leave out the terminal format and outcome terms.
    #[arg(long)]
    pub no_outcome: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Environment section file (tasks, episode, reward, agent, retriever).
    #[arg(long)]
    pub env_config: Option<PathBuf>,
    /// Trainer section file.
    #[arg(long)]
    pub trainer_config: Option<PathBuf>,
    #[arg(long)]
    pub ablate: Option<Ablation>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Add a wall-clock column to the log.
    #[arg(long)]
    pub log_wall_clock: bool,
    #[arg(long)]
    pub out_log: PathBuf,
    #[arg(long)]
    pub out_policy: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

type Boxed = Box<dyn StdError + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(Boxed),
    #[error(transparent)]
    Backend(Boxed),
    #[error(transparent)]
    Other(Boxed),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    fn data(e: impl Into<Boxed>) -> Self {
        CliError::Data(e.into())
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        CliError::data(e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::data(e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::data(e)
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::Contract(m) => CliError::Usage(m),
            other => CliError::data(other),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TaskGenError> for CliError {
    fn from(e: TaskGenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(m) => CliError::Usage(m),
            other => CliError::Backend(other.into()),
        }
    }
}

impl From<EpisodeError> for CliError {
    fn from(e: EpisodeError) -> Self {
        match e {
            EpisodeError::Backend { source: BackendError::Config(m), .. } => CliError::Usage(m),
            e @ EpisodeError::Backend { .. } => CliError::Backend(e.into()),
            EpisodeError::Prompt(p) => p.into(),
            EpisodeError::Config(m) => CliError::Usage(m),
        }
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Episode(e) => e.into(),
            ProbeError::Metrics(m) => m.into(),
            e @ ProbeError::Depth { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => CliError::Usage(m),
            TrainError::Episode(e) => e.into(),
            TrainError::Tasks(e) => e.into(),
            other => CliError::Other(other.into()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, &(serde_json::to_string_pretty(value).expect("serialisable") + "\n"))
}

/// Applies the config layers shared by every subcommand.
fn base_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    for path in &cli.config {
        cfg.overlay_file(path, None)?;
    }
    Ok(cfg)
}

fn finish_config(cli: &Cli, mut cfg: RunConfig, paths: &[(&str, Option<&Path>)]) -> Result<RunConfig, CliError> {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    for (name, path) in paths {
        if let Some(p) = path {
            cfg.paths.insert(name.to_string(), p.to_path_buf());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_policy_flags(cfg: &mut RunConfig, p: &PolicyArgs) {
    if let Some(v) = p.hop_success_prob {
        cfg.scripted.hop_success_prob = v;
    }
    if let Some(v) = p.extraction_bias {
        cfg.scripted.extraction_depth_bias = v;
    }
    if let Some(v) = &p.base_url {
        cfg.remote.base_url = v.clone();
    }
    if let Some(v) = p.timeout_secs {
        cfg.remote.timeout_secs = v;
    }
    if let Some(v) = p.retries {
        cfg.remote.retries = v;
    }
    if let Some(v) = &p.templates_dir {
        cfg.templates_dir = Some(v.clone());
    }
    if let Some(v) = p.max_turns {
        cfg.episode.max_turns = v;
    }
    if let Some(v) = p.k {
        cfg.episode.k = v;
    }
}

fn backend(cfg: &RunConfig, p: &PolicyArgs) -> Result<PolicyBackend, CliError> {
    Ok(match p.policy {
        PolicyKind::Scripted => PolicyBackend::Scripted(cfg.scripted),
        PolicyKind::Remote => PolicyBackend::Remote(cfg.remote.clone()),
        PolicyKind::Parametric => {
            let path = p
                .policy_file
                .as_deref()
                .ok_or_else(|| CliError::Usage("--policy parametric needs --policy-file".into()))?;
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let ck: PolicyCheckpoint = from_json_str(&text).map_err(CliError::data)?;
            let policy = ck.policy().map_err(|m| CliError::data(format!("{}: {m}", path.display())))?;
            PolicyBackend::Parametric { policy, model: ck.agent, greedy: p.greedy }
        }
    })
}

fn prompts(cfg: &RunConfig) -> Result<PromptSet, CliError> {
    let set = PromptSet::builtin();
    Ok(match &cfg.templates_dir {
        Some(dir) => set.with_overrides(dir)?,
        None => set,
    })
}

enum Source {
    Oracle(TaskSet),
    Index(RetrievalIndex),
}

fn load_source(s: &SourceArgs) -> Result<(Source, Dataset), CliError> {
    match (&s.tasks, &s.corpus) {
        (Some(tasks), _) => {
            let set = load_tasks(tasks)?;
            let dataset = match &s.dataset {
                Some(d) => load_dataset(d)?,
                None => set.dataset(),
            };
            Ok((Source::Oracle(set), dataset))
        }
        (None, Some(corpus)) => {
            let dataset = s
                .dataset
                .as_deref()
                .ok_or_else(|| CliError::Usage("--corpus needs --dataset".into()))?;
            Ok((Source::Index(ingest_corpus(corpus)?), load_dataset(dataset)?))
        }
        (None, None) => Err(CliError::Usage("give --tasks or --corpus".into())),
    }
}

fn source_paths(s: &SourceArgs) -> Vec<(&'static str, Option<&Path>)> {
    vec![("dataset", s.dataset.as_deref()), ("corpus", s.corpus.as_deref()), ("tasks", s.tasks.as_deref())]
}

/// Runs a parsed command, writing human-facing output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let say = |out: &mut dyn Write, text: String| writeln!(out, "{text}").map_err(|e| CliError::Other(e.into()));
    match &cli.command {
        Command::Ingest(a) => {
            let index = ingest_corpus(&a.corpus)?;
            let stats = index.stats();
            if a.check {
                say(stdout, format!("ok: {} documents, {} terms", stats.documents, stats.terms))
            } else {
                say(stdout, serde_json::to_string(&stats).expect("serialisable"))
            }
        }
        Command::Generate(a) => {
            let mut cfg = base_config(cli)?;
            if let Some(v) = a.count {
                cfg.tasks.count = v;
            }
            if let Some(v) = &a.depths {
                cfg.tasks.depths = v.clone();
            }
            if let Some(v) = a.distractors {
                cfg.tasks.distractors = v;
            }
            let cfg = finish_config(cli, cfg, &[("out_dir", Some(&a.out_dir))])?;
            std::fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
            let set = generate_tasks(&cfg.tasks, cfg.seed)?;
            set.write(&a.out_dir)?;
            let tasks = a.out_dir.join("tasks.jsonl");
            cfg.write_beside(&tasks)?;
            say(stdout, format!("wrote {} tasks to {}", set.len(), a.out_dir.display()))
        }
        Command::Rollout(a) => {
            let mut cfg = base_config(cli)?;
            apply_policy_flags(&mut cfg, &a.policy);
            if a.fixed_depth.is_some() {
                cfg.episode.fixed_depth = a.fixed_depth;
            }
            let mut paths = source_paths(&a.source);
            paths.push(("out", Some(&a.out)));
            paths.push(("policy_file", a.policy.policy_file.as_deref()));
            let cfg = finish_config(cli, cfg, &paths)?;
            let backend = backend(&cfg, &a.policy)?;
            let prompts = prompts(&cfg)?;
            let (source, dataset) = load_source(&a.source)?;
            let retriever = match &source {
                Source::Oracle(t) => RetrieverSource::Oracle(t),
                Source::Index(i) => RetrieverSource::Index(i),
            };
            let ctx = RunContext { backend: &backend, retriever, prompts: &prompts, config: &cfg.episode, seed: cfg.seed, jobs: cfg.jobs };
            let trajs = run_dataset(&ctx, dataset.records())?;
            write_trajectories(&a.out, &trajs)?;
            cfg.write_beside(&a.out)?;
            say(stdout, format!("wrote {} trajectories to {}", trajs.len(), a.out.display()))
        }
        Command::Score(a) => {
            let cfg = finish_config(
                cli,
                base_config(cli)?,
                &[("trajectories", Some(&a.trajectories)), ("dataset", Some(&a.dataset)), ("out", Some(&a.out))],
            )?;
            let dataset = load_dataset(&a.dataset)?;
            let mut trajs = read_trajectories(&a.trajectories)?;
            for t in &mut trajs {
                let record = dataset.get(&t.question_id).ok_or_else(|| MetricsError::UnknownQuestion(t.question_id.clone()))?;
                score_trajectory(t, record, &cfg.reward)?;
            }
            write_trajectories(&a.out, &trajs)?;
            cfg.write_beside(&a.out)?;
            say(stdout, format!("scored {} trajectories", trajs.len()))
        }
        Command::Eval(a) => {
            let cfg = finish_config(
                cli,
                base_config(cli)?,
                &[("trajectories", Some(&a.trajectories)), ("dataset", Some(&a.dataset)), ("out", a.out.as_deref()), ("csv", a.csv.as_deref())],
            )?;
            let dataset = load_dataset(&a.dataset)?;
            let trajs = read_trajectories(&a.trajectories)?;
            let report = aggregate_metrics(&trajs, &dataset)?;
            emit_report(&cfg, &report, None, a.out.as_deref(), a.csv.as_deref())?;
            say(stdout, serde_json::to_string(&report).expect("serialisable"))
        }
        Command::Report(a) => {
            let cfg = finish_config(
                cli,
                base_config(cli)?,
                &[("trajectories", Some(&a.trajectories)), ("dataset", Some(&a.dataset)), ("out", a.out.as_deref()), ("csv", a.csv.as_deref())],
            )?;
            let dataset = load_dataset(&a.dataset)?;
            let trajs = read_trajectories(&a.trajectories)?;
            if let Some(t) = trajs.iter().find(|t| !t.is_scored()) {
                return Err(CliError::data(format!(
                    "trajectory {} has no rewards; run `searchdepth score` first",
                    t.question_id
                )));
            }
            let report = aggregate_metrics(&trajs, &dataset)?;
            let counts = step_class_counts(&trajs);
            let json = emit_report(&cfg, &report, Some(counts), a.out.as_deref(), a.csv.as_deref())?;
            say(stdout, json)
        }
        Command::Probe(a) => {
            let mut cfg = base_config(cli)?;
            apply_policy_flags(&mut cfg, &a.policy);
            let mut paths = source_paths(&a.source);
            paths.push(("out", Some(&a.out)));
            let cfg = finish_config(cli, cfg, &paths)?;
            let backend = backend(&cfg, &a.policy)?;
            let prompts = prompts(&cfg)?;
            let (source, dataset) = load_source(&a.source)?;
            let retriever = match &source {
                Source::Oracle(t) => RetrieverSource::Oracle(t),
                Source::Index(i) => RetrieverSource::Index(i),
            };
            let episode = crate::sim::EpisodeConfig { fixed_depth: None, ..cfg.episode.clone() };
            let ctx = RunContext { backend: &backend, retriever, prompts: &prompts, config: &episode, seed: cfg.seed, jobs: cfg.jobs };
            let rows = probe_fixed_depth(&ctx, &dataset, &a.depths)?;
            let mut csv = format!("{PROBE_CSV_HEADER}\n");
            for r in &rows {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            write_file(&a.out, &csv)?;
            cfg.write_beside(&a.out)?;
            say(stdout, csv.trim_end().to_string())
        }
        Command::Curve(a) => {
            let cfg = finish_config(cli, base_config(cli)?, &[("out", Some(&a.out))])?;
            if let Some(&bad) = a.t_c.iter().find(|&&t| t == 0 || t > a.max_depth) {
                return Err(CliError::Usage(format!("--t-c {bad} outside 1..={}", a.max_depth)));
            }
            let columns = a
                .t_c
                .iter()
                .map(|&t| cumulative_reward_curve(t, a.max_depth, &cfg.reward, !a.no_outcome))
                .collect::<Result<Vec<_>, _>>()?;
            let csv = curve_csv(&a.t_c, &columns);
            write_file(&a.out, &csv)?;
            cfg.write_beside(&a.out)?;
            say(stdout, format!("wrote {} rows to {}", a.max_depth, a.out.display()))
        }
        Command::Train(a) => {
            let mut cfg = base_config(cli)?;
            if let Some(p) = &a.env_config {
                cfg.overlay_file(p, None)?;
            }
            if let Some(p) = &a.trainer_config {
                cfg.overlay_file(p, Some("trainer"))?;
            }
            if let Some(n) = a.iterations {
                cfg.trainer.iterations = n;
            }
            if a.log_wall_clock {
                cfg.trainer.log_wall_clock = true;
            }
            if let Some(j) = cli.jobs {
                cfg.trainer.jobs = j;
            }
            let cfg = finish_config(
                cli,
                cfg,
                &[
                    ("env_config", a.env_config.as_deref()),
                    ("trainer_config", a.trainer_config.as_deref()),
                    ("out_log", Some(&a.out_log)),
                    ("out_policy", Some(&a.out_policy)),
                ],
            )?;
            let outcome = train(&cfg.env(), &cfg.trainer, cfg.seed, a.ablate)?;
            outcome.log.write_csv(&a.out_log).map_err(io_err(&a.out_log))?;
            let ck = PolicyCheckpoint::new(&outcome.policy, cfg.agent, outcome.config_hash.clone());
            write_json(&a.out_policy, &ck)?;
            cfg.write_beside(&a.out_log)?;
            cfg.write_beside(&a.out_policy)?;
            let tail = outcome.log.tail(50).expect("at least one iteration");
            say(stdout, serde_json::to_string(&tail).expect("serialisable"))
        }
    }
}

pub fn curve_csv(t_c: &[usize], columns: &[Vec<(usize, f64)>]) -> String {
    let mut out = String::from("depth");
    for t in t_c {
        out.push_str(&format!(",t_c_{t}"));
    }
    out.push('\n');
    let rows = columns.first().map_or(0, Vec::len);
    for r in 0..rows {
        out.push_str(&columns[0][r].0.to_string());
        for col in columns {
            out.push_str(&format!(",{}", col[r].1));
        }
        out.push('\n');
    }
    out
}

/// Search steps per efficiency branch.
pub fn step_class_counts(trajs: &[crate::trajectory::Trajectory]) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::from([("effective", 0), ("over_search", 0), ("under_search", 0)]);
    for t in trajs {
        for s in &t.steps {
            let key = match classify_step(s.index, t.t_c) {
                StepClass::UnderSearch => "under_search",
                StepClass::Effective => "effective",
                StepClass::OverSearch => "over_search",
            };
            *counts.get_mut(key).expect("all keys present") += 1;
        }
    }
    counts
}

fn emit_report(
    cfg: &RunConfig,
    report: &MetricsReport,
    counts: Option<BTreeMap<&'static str, usize>>,
    json_out: Option<&Path>,
    csv_out: Option<&Path>,
) -> Result<String, CliError> {
    let mut value = serde_json::to_value(report).expect("serialisable");
    let mut header = MetricsReport::CSV_HEADER.to_string();
    let mut row = report.csv_row();
    if let Some(counts) = &counts {
        value["step_classes"] = json!(counts);
        for (k, v) in counts {
            header.push_str(&format!(",{k}"));
            row.push_str(&format!(",{v}"));
        }
    }
    if let Some(p) = json_out {
        write_json(p, &value)?;
        cfg.write_beside(p)?;
    }
    if let Some(p) = csv_out {
        write_file(p, &format!("{header}\n{row}\n"))?;
        cfg.write_beside(p)?;
    }
    Ok(serde_json::to_string(&value).expect("serialisable"))
}
