use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reader::{follow_chain, parse_question, read_prompt, ChainProgress, PromptView, QuestionChain};
use super::scripted::answer_text;
use super::{BackendError, PolicySession};
use crate::metrics::normalize_answer;

pub const FEATURES: usize = 5;
pub const ACTIONS: usize = 3;
pub const FEATURE_NAMES: [&str; FEATURES] =
    ["bias", "hop_progress", "steps_so_far", "last_retrieval_success", "last_step_valid"];

pub type Features = [f64; FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    SearchNextBridge,
    RepeatLastSearch,
    Answer,
}

impl Decision {
    pub const ALL: [Decision; ACTIONS] = [Decision::SearchNextBridge, Decision::RepeatLastSearch, Decision::Answer];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Decision::SearchNextBridge => "search_next_bridge",
            Decision::RepeatLastSearch => "repeat_last_search",
            Decision::Answer => "answer",
        }
    }
}

/// Linear softmax policy over per-turn decisions, with a linear value head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametricPolicy {
    pub theta: [[f64; FEATURES]; ACTIONS],
    pub value: [f64; FEATURES],
}

impl Default for ParametricPolicy {
    fn default() -> Self {
        Self { theta: [[0.0; FEATURES]; ACTIONS], value: [0.0; FEATURES] }
    }
}

fn dot(a: &Features, b: &Features) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ParametricPolicy {
    pub fn logits(&self, phi: &Features) -> [f64; ACTIONS] {
        std::array::from_fn(|a| dot(&self.theta[a], phi))
    }

    pub fn log_probabilities(&self, phi: &Features) -> [f64; ACTIONS] {
        let z = self.logits(phi);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        z.map(|v| v - lse)
    }

    pub fn probabilities(&self, phi: &Features) -> [f64; ACTIONS] {
        self.log_probabilities(phi).map(f64::exp)
    }

    pub fn value_of(&self, phi: &Features) -> f64 {
        dot(&self.value, phi)
    }

    pub fn mean_abs_theta(&self) -> f64 {
        self.theta.iter().flatten().map(|v| v.abs()).sum::<f64>() / (FEATURES * ACTIONS) as f64
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().flatten().chain(&self.value).all(|v| v.is_finite())
    }
}

/// How the simulated agent behind the parametric policy reads documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentModel {
    /// Chance that a bridge search names the right entity.
    pub hop_success_prob: f64,
    /// Chance of extracting the answer from one sighting of the answer
    /// document. The agent cannot tell whether it succeeded.
    pub comprehension_prob: f64,
    /// Scale for the steps-so-far feature.
    pub max_turns: usize,
}

impl Default for AgentModel {
    fn default() -> Self {
        Self { hop_success_prob: 1.0, comprehension_prob: 0.97, max_turns: 4 }
    }
}

impl AgentModel {
    pub fn validate(&self) -> Result<(), BackendError> {
        for (name, p) in [("hop_success_prob", self.hop_success_prob), ("comprehension_prob", self.comprehension_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(BackendError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.max_turns == 0 {
            return Err(BackendError::Config("max_turns must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub features: Features,
    pub action: Decision,
    pub logp: f64,
}

/// One episode of the parametric policy. Holds a borrowed parameter
/// snapshot, so updates cannot interleave with the episode.
pub struct ParametricSession<'a> {
    policy: &'a ParametricPolicy,
    model: AgentModel,
    rng: ChaCha8Rng,
    /// Extraction outcome per answer sighting, drawn on first use.
    comprehension: Vec<(usize, bool)>,
    pub decisions: Vec<DecisionRecord>,
    /// Take the most likely decision instead of sampling.
    pub greedy: bool,
}

impl<'a> ParametricSession<'a> {
    pub fn new(policy: &'a ParametricPolicy, model: AgentModel, episode_key: u64) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(episode_key, "parametric", 0));
        Self { policy, model, rng, comprehension: Vec::new(), decisions: Vec::new(), greedy: false }
    }

    fn understood(&mut self, progress: &ChainProgress, steps: usize) -> bool {
        let mut any = false;
        for &s in progress.answer_steps.iter().filter(|&&s| s <= steps) {
            let ok = match self.comprehension.iter().find(|(k, _)| *k == s) {
                Some(&(_, ok)) => ok,
                None => {
                    let ok = self.rng.random_bool(self.model.comprehension_prob);
                    self.comprehension.push((s, ok));
                    ok
                }
            };
            any |= ok;
        }
        any
    }

    pub fn features(&self, view: &PromptView, progress: &ChainProgress) -> Features {
        let t = view.steps();
        let last_valid = match (view.queries.last(), view.observations.last()) {
            (Some(q), Some(o)) if t > 0 => {
                let earlier_q = &view.queries[..view.queries.len() - 1];
                let earlier_o = &view.observations[..t - 1];
                let nq = normalize_answer(q);
                !q.is_empty()
                    && !o.is_empty()
                    && !earlier_q.iter().any(|e| normalize_answer(e) == nq)
                    && !earlier_o.contains(o)
            }
            _ => true,
        };
        [
            1.0,
            f64::from(u8::from(progress.complete())),
            t as f64 / self.model.max_turns as f64,
            f64::from(u8::from(progress.useful.last().copied().unwrap_or(false))),
            f64::from(u8::from(last_valid)),
        ]
    }

    fn choose(&mut self, phi: &Features) -> (Decision, f64) {
        let logp = self.policy.log_probabilities(phi);
        let a = if self.greedy {
            (0..ACTIONS).max_by(|&i, &j| logp[i].total_cmp(&logp[j]).then(j.cmp(&i))).expect("non-empty")
        } else {
            let u: f64 = self.rng.random();
            let mut acc = 0.0;
            let mut pick = ACTIONS - 1;
            for (i, lp) in logp.iter().enumerate() {
                acc += lp.exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        (Decision::ALL[a], logp[a])
    }

    fn render(&mut self, decision: Decision, chain: &QuestionChain, progress: &ChainProgress, view: &PromptView) -> String {
        let t = view.steps();
        match decision {
            Decision::SearchNextBridge => match progress.next_relation(chain) {
                Some(rel) if self.rng.random_bool(self.model.hop_success_prob) => {
                    format!("<think>Next hop.</think>\n<search>{rel} of {}</search>", progress.current)
                }
                Some(rel) => format!("<think>Next hop.</think>\n<search>{rel} lookup {}</search>", t + 1),
                None => {
                    let attr = chain.path.last().expect("path is non-empty");
                    format!("<think>Verify.</think>\n<search>{attr} of {} confirm {}</search>", progress.current, t + 1)
                }
            },
            Decision::RepeatLastSearch => match view.queries.iter().rev().find(|q| !q.is_empty()) {
                Some(q) => format!("<think>Again.</think>\n<search>{q}</search>"),
                None => "<think>Again.</think>".to_string(),
            },
            Decision::Answer => {
                let known = if self.understood(progress, t) { progress.answer.clone() } else { None };
                answer_text(known.as_deref(), t)
            }
        }
    }
}

impl PolicySession for ParametricSession<'_> {
    fn generate(&mut self, prompt: &str, _stop: &[&str], _max_new_tokens: usize) -> Result<String, BackendError> {
        let view = read_prompt(prompt);
        let t = view.steps();
        let chain = parse_question(&view.question);
        let progress = chain.as_ref().map(|c| follow_chain(c, &view.observations));
        if view.intermediate {
            let known = match &progress {
                Some(p) if self.understood(p, t) => p.answer.clone(),
                _ => None,
            };
            return Ok(answer_text(known.as_deref(), t));
        }
        let (Some(chain), Some(progress)) = (chain, progress) else {
            return Ok(answer_text(None, t));
        };
        let phi = self.features(&view, &progress);
        let (decision, logp) = self.choose(&phi);
        self.decisions.push(DecisionRecord { features: phi, action: decision, logp });
        Ok(self.render(decision, &chain, &progress, &view))
    }
}
