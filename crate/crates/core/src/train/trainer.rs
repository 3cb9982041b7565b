use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{gae_advantages, masked_ppo_loss, value_loss, PpoSample, TrainError};
use crate::metrics::{exact_match, over_searched};
use crate::policy::parametric::{ACTIONS, FEATURE_NAMES};
use crate::policy::{AgentModel, Decision, ParametricPolicy, ParametricSession, PromptSet};
use crate::retrieval::{OracleRetriever, RetrievalIndex, Retriever};
use crate::reward::{score_trajectory, Ablation, RewardConstants};
use crate::seed::derive;
use crate::sim::{generate_tasks, run_episode, EpisodeConfig, SyntheticTask, TaskGenConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_episodes: usize,
    pub minibatch_episodes: usize,
    pub ppo_epochs: usize,
    /// Fractions of `iterations` spent ramping each learning rate up from 0.
    pub actor_warmup: f64,
    pub critic_warmup: f64,
    pub iterations: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub normalize_advantages: bool,
    /// Abort once mean |theta| exceeds this.
    pub divergence_bound: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Episode collection threads.
    pub jobs: usize,
    /// Adds a wall-clock column to the log, which makes it non-reproducible.
    pub log_wall_clock: bool,
    /// Starting logit offset per decision (search next, repeat, answer),
    /// placed on the bias feature of a fresh policy.
    pub initial_bias: [f64; ACTIONS],
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-3,
            critic_lr: 1e-2,
            batch_episodes: 512,
            minibatch_episodes: 256,
            ppo_epochs: 1,
            actor_warmup: 0.285,
            critic_warmup: 0.015,
            iterations: 1005,
            clip: 0.2,
            gamma: 1.0,
            lambda: 0.95,
            normalize_advantages: true,
            divergence_bound: 100.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            jobs: 1,
            log_wall_clock: false,
            initial_bias: [0.0; ACTIONS],
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return fail(format!("clip must lie in (0, 1), got {}", self.clip));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.batch_episodes == 0 || self.minibatch_episodes == 0 || self.minibatch_episodes > self.batch_episodes {
            return fail(format!(
                "need 0 < minibatch_episodes ({}) <= batch_episodes ({})",
                self.minibatch_episodes, self.batch_episodes
            ));
        }
        for (name, v) in [("actor_warmup", self.actor_warmup), ("critic_warmup", self.critic_warmup)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.actor_lr < 0.0 || self.critic_lr < 0.0 || !self.actor_lr.is_finite() || !self.critic_lr.is_finite() {
            return fail("learning rates must be finite and non-negative".into());
        }
        if self.ppo_epochs == 0 {
            return fail("ppo_epochs must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvRetriever {
    Oracle,
    Lexical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub tasks: TaskGenConfig,
    pub episode: EpisodeConfig,
    pub reward: RewardConstants,
    pub agent: AgentModel,
    pub retriever: EnvRetriever,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            tasks: TaskGenConfig::default(),
            episode: EpisodeConfig::default(),
            reward: RewardConstants::default(),
            agent: AgentModel::default(),
            retriever: EnvRetriever::Oracle,
        }
    }
}

/// Learning rate after linear warmup over `ratio * total` iterations.
pub fn warmup_lr(base: f64, iteration: usize, total: usize, ratio: f64) -> f64 {
    let warm = (ratio * total as f64).round() as usize;
    if warm == 0 || iteration >= warm {
        base
    } else {
        base * iteration as f64 / warm as f64
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, cfg: &TrainerConfig) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: cfg.adam_beta1, beta2: cfg.adam_beta2, eps: cfg.adam_eps }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub iteration: usize,
    pub sd: f64,
    pub valid_ratio: f64,
    pub em: f64,
    pub osr: f64,
    pub reward: f64,
    /// Mean policy decisions per episode.
    pub decisions: f64,
    /// Mean search depth per task-depth bucket, aligned with
    /// [`TrainingLog::depths`]; NaN for a bucket absent from the batch.
    pub sd_by_depth: Vec<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub depths: Vec<usize>,
    pub rows: Vec<TrainingRow>,
}

/// Means over the last rows of a log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSummary {
    pub rows: usize,
    pub sd: f64,
    pub sd_by_depth: Vec<(usize, f64)>,
    pub valid_ratio: f64,
    pub em: f64,
    pub osr: f64,
    pub reward: f64,
}

impl TrainingLog {
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["iteration", "sd", "valid_ratio", "em", "osr", "reward", "decisions"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        cols.extend(self.depths.iter().map(|d| format!("sd_depth{d}")));
        if self.rows.iter().any(|r| r.wall_ms.is_some()) {
            cols.push("wall_ms".into());
        }
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![
                r.iteration.to_string(),
                r.sd.to_string(),
                r.valid_ratio.to_string(),
                r.em.to_string(),
                r.osr.to_string(),
                r.reward.to_string(),
                r.decisions.to_string(),
            ];
            cells.extend(r.sd_by_depth.iter().map(f64::to_string));
            if let Some(ms) = r.wall_ms {
                cells.push(format!("{ms:.3}"));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::File::create(path)?.write_all(self.to_csv().as_bytes())
    }

    pub fn tail(&self, n: usize) -> Option<TailSummary> {
        let rows = &self.rows[self.rows.len().saturating_sub(n)..];
        if rows.is_empty() {
            return None;
        }
        let mean = |f: &dyn Fn(&TrainingRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
        let sd_by_depth = self
            .depths
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let vals: Vec<f64> = rows.iter().map(|r| r.sd_by_depth[i]).filter(|v| !v.is_nan()).collect();
                (d, vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        Some(TailSummary {
            rows: rows.len(),
            sd: mean(&|r| r.sd),
            sd_by_depth,
            valid_ratio: mean(&|r| r.valid_ratio),
            em: mean(&|r| r.em),
            osr: mean(&|r| r.osr),
            reward: mean(&|r| r.reward),
        })
    }
}

/// Saved parameters plus what is needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub theta: Vec<Vec<f64>>,
    pub value: Vec<f64>,
    pub feature_schema: Vec<String>,
    pub actions: Vec<String>,
    pub agent: AgentModel,
    pub config_hash: String,
}

impl PolicyCheckpoint {
    pub fn new(policy: &ParametricPolicy, agent: AgentModel, config_hash: String) -> Self {
        Self {
            theta: policy.theta.iter().map(|r| r.to_vec()).collect(),
            value: policy.value.to_vec(),
            feature_schema: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            actions: Decision::ALL.iter().map(|d| d.name().to_string()).collect(),
            agent,
            config_hash,
        }
    }

    pub fn policy(&self) -> Result<ParametricPolicy, String> {
        if self.feature_schema.iter().map(String::as_str).ne(FEATURE_NAMES) {
            return Err(format!("feature schema {:?} does not match {:?}", self.feature_schema, FEATURE_NAMES));
        }
        if self.theta.len() != ACTIONS || self.theta.iter().any(|r| r.len() != FEATURE_NAMES.len()) {
            return Err("theta has the wrong shape".into());
        }
        if self.value.len() != FEATURE_NAMES.len() {
            return Err("value head has the wrong shape".into());
        }
        let mut p = ParametricPolicy::default();
        for (dst, src) in p.theta.iter_mut().zip(&self.theta) {
            dst.copy_from_slice(src);
        }
        p.value.copy_from_slice(&self.value);
        Ok(p)
    }
}

/// Hex SHA-256 of a value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serialisation cannot fail");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: ParametricPolicy,
    pub log: TrainingLog,
    pub config_hash: String,
}

struct EpisodeOutcome {
    samples: Vec<PpoSample>,
    depth_bucket: usize,
    steps: usize,
    valid_steps: usize,
    em: f64,
    osr: bool,
    reward: f64,
    decisions: usize,
}

struct Env<'a> {
    tasks: &'a [SyntheticTask],
    index: Option<&'a RetrievalIndex>,
    prompts: &'a PromptSet,
    episode: &'a EpisodeConfig,
    reward: &'a RewardConstants,
    agent: AgentModel,
    gamma: f64,
    lambda: f64,
}

fn collect_episode(env: &Env<'_>, snapshot: &ParametricPolicy, task: &SyntheticTask, key: u64) -> Result<EpisodeOutcome, TrainError> {
    let record = task.record();
    let mut session = ParametricSession::new(snapshot, env.agent, key);
    let oracle = OracleRetriever::new(task);
    let retriever: &dyn Retriever = match env.index {
        Some(i) => i,
        None => &oracle,
    };
    let mut traj = run_episode(&mut session, retriever, &record, env.prompts, env.episode)?;
    let breakdown = score_trajectory(&mut traj, &record, env.reward)?;
    let decisions = &session.decisions;
    if decisions.len() != traj.steps.len() + 1 {
        return Err(TrainError::Contract(format!(
            "{} decisions for {} steps",
            decisions.len(),
            traj.steps.len()
        )));
    }

    // Decision positions, each search followed by its masked observation.
    let mut samples = Vec::with_capacity(2 * decisions.len());
    for (j, d) in decisions.iter().enumerate() {
        let base = PpoSample {
            features: d.features,
            action: d.action.index(),
            old_logp: d.logp,
            advantage: 0.0,
            ret: 0.0,
            reward: breakdown.overall[j],
            trainable: true,
        };
        samples.push(base);
        if traj.steps.get(j).is_some_and(|s| !s.retrieved_doc_ids.is_empty()) {
            samples.push(PpoSample { reward: 0.0, trainable: false, ..base });
        }
    }
    let trainable: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].trainable).collect();
    let rewards: Vec<f64> = trainable.iter().map(|&i| samples[i].reward).collect();
    let mut values: Vec<f64> = trainable.iter().map(|&i| snapshot.value_of(&samples[i].features)).collect();
    values.push(0.0);
    let (adv, ret) = gae_advantages(&rewards, &values, env.gamma, env.lambda)?;
    for (k, &i) in trainable.iter().enumerate() {
        samples[i].advantage = adv[k];
        samples[i].ret = ret[k];
    }

    Ok(EpisodeOutcome {
        depth_bucket: task.depth,
        steps: traj.steps.len(),
        valid_steps: traj.steps.iter().filter(|s| s.valid).count(),
        em: traj.final_answer.as_deref().map_or(0.0, |a| f64::from(exact_match(a, &record.gold_answers))),
        osr: over_searched(&traj, &record.gold_answers),
        reward: breakdown.total(),
        decisions: decisions.len(),
        samples,
    })
}

fn summarise(iteration: usize, depths: &[usize], batch: &[EpisodeOutcome], wall_ms: Option<f64>) -> TrainingRow {
    let n = batch.len() as f64;
    let steps: usize = batch.iter().map(|e| e.steps).sum();
    let valid: usize = batch.iter().map(|e| e.valid_steps).sum();
    let sd_by_depth = depths
        .iter()
        .map(|&d| {
            let bucket: Vec<&EpisodeOutcome> = batch.iter().filter(|e| e.depth_bucket == d).collect();
            if bucket.is_empty() {
                f64::NAN
            } else {
                bucket.iter().map(|e| e.steps as f64).sum::<f64>() / bucket.len() as f64
            }
        })
        .collect();
    TrainingRow {
        iteration,
        sd: steps as f64 / n,
        valid_ratio: if steps == 0 { 1.0 } else { valid as f64 / steps as f64 },
        em: batch.iter().map(|e| e.em).sum::<f64>() / n,
        osr: batch.iter().filter(|e| e.osr).count() as f64 / n,
        reward: batch.iter().map(|e| e.reward).sum::<f64>() / n,
        decisions: batch.iter().map(|e| e.decisions as f64).sum::<f64>() / n,
        sd_by_depth,
        wall_ms,
    }
}

/// Trains a fresh parametric policy. With `jobs = 1` the result is a pure
/// function of the configs and the seed.
pub fn train(env_cfg: &EnvConfig, cfg: &TrainerConfig, seed: u64, ablation: Option<Ablation>) -> Result<TrainOutcome, TrainError> {
    let mut policy = ParametricPolicy::default();
    for (row, b) in policy.theta.iter_mut().zip(cfg.initial_bias) {
        row[0] = b;
    }
    train_from(policy, env_cfg, cfg, seed, ablation)
}

pub(crate) fn train_from(
    mut policy: ParametricPolicy,
    env_cfg: &EnvConfig,
    cfg: &TrainerConfig,
    seed: u64,
    ablation: Option<Ablation>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    env_cfg.episode.validate()?;
    env_cfg.agent.validate().map_err(|e| TrainError::Config(e.to_string()))?;
    let reward = ablation.map_or(env_cfg.reward, |a| env_cfg.reward.ablate(a));
    reward.validate()?;
    let hash = config_hash(&(env_cfg, cfg, seed, ablation));

    let tasks = generate_tasks(&env_cfg.tasks, derive(seed, "env", 0))?;
    let index = match env_cfg.retriever {
        EnvRetriever::Lexical => Some(RetrievalIndex::build(tasks.corpus()).map_err(|e| TrainError::Config(e.to_string()))?),
        EnvRetriever::Oracle => None,
    };
    let prompts = PromptSet::builtin();
    let env = Env {
        tasks: &tasks.tasks,
        index: index.as_ref(),
        prompts: &prompts,
        episode: &env_cfg.episode,
        reward: &reward,
        agent: env_cfg.agent,
        gamma: cfg.gamma,
        lambda: cfg.lambda,
    };
    let mut depths: Vec<usize> = env_cfg.tasks.depths.clone();
    depths.sort_unstable();
    depths.dedup();

    let pool = if cfg.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build()
                .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut actor_opt = Adam::new(policy.theta.as_flattened().len(), cfg);
    let mut critic_opt = Adam::new(policy.value.len(), cfg);
    let mut log = TrainingLog { depths: depths.clone(), rows: Vec::with_capacity(cfg.iterations) };

    for it in 0..cfg.iterations {
        let started = Instant::now();
        let snapshot = policy.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "batch", it as u64));
        let jobs: Vec<(usize, u64)> = (0..cfg.batch_episodes)
            .map(|e| {
                let pick = rng.random_range(0..env.tasks.len());
                (pick, derive(seed, "episode", (it * cfg.batch_episodes + e) as u64))
            })
            .collect();
        let run = |&(pick, key): &(usize, u64)| collect_episode(&env, &snapshot, &env.tasks[pick], key);
        let mut batch: Vec<EpisodeOutcome> = match &pool {
            Some(pool) => pool.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?,
            None => jobs.iter().map(run).collect::<Result<_, _>>()?,
        };

        if cfg.normalize_advantages {
            let advs: Vec<f64> = batch.iter().flat_map(|e| e.samples.iter().filter(|s| s.trainable).map(|s| s.advantage)).collect();
            let mean = advs.iter().sum::<f64>() / advs.len() as f64;
            let var = advs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / advs.len() as f64;
            let std = var.sqrt().max(1e-8);
            for s in batch.iter_mut().flat_map(|e| e.samples.iter_mut()).filter(|s| s.trainable) {
                s.advantage = (s.advantage - mean) / std;
            }
        }

        let actor_lr = warmup_lr(cfg.actor_lr, it, cfg.iterations, cfg.actor_warmup);
        let critic_lr = warmup_lr(cfg.critic_lr, it, cfg.iterations, cfg.critic_warmup);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        for _ in 0..cfg.ppo_epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch_episodes) {
                let mb: Vec<PpoSample> = chunk.iter().flat_map(|&e| batch[e].samples.iter().copied()).collect();
                let (_, g_actor) = masked_ppo_loss(&mb, &policy.theta, cfg.clip)?;
                let (_, g_critic) = value_loss(&mb, &policy.value)?;
                actor_opt.step(policy.theta.as_flattened_mut(), g_actor.as_flattened(), actor_lr);
                critic_opt.step(&mut policy.value, &g_critic, critic_lr);
            }
        }

        let drift = policy.mean_abs_theta();
        if !policy.is_finite() || drift > cfg.divergence_bound {
            return Err(TrainError::Diverged { iteration: it, mean_abs_theta: drift, bound: cfg.divergence_bound });
        }
        let wall = cfg.log_wall_clock.then(|| started.elapsed().as_secs_f64() * 1e3);
        log.rows.push(summarise(it, &depths, &batch, wall));
    }
    Ok(TrainOutcome { policy, log, config_hash: hash })
}
