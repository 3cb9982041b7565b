use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reader::{follow_chain, parse_question, read_prompt, ChainProgress, PromptView, QuestionChain};
use super::{BackendError, PolicySession, WRONG_ANSWERS};

/// A rule-based agent with two capability knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedCapability {
    /// Chance of phrasing the right bridge query at each unresolved hop.
    pub hop_success_prob: f64,
    /// Extra steps needed after the answer document is first seen before
    /// the agent can state the answer.
    pub extraction_depth_bias: usize,
    pub seed: u64,
}

impl Default for ScriptedCapability {
    fn default() -> Self {
        Self { hop_success_prob: 1.0, extraction_depth_bias: 0, seed: 0 }
    }
}

impl ScriptedCapability {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=1.0).contains(&self.hop_success_prob) {
            return Err(BackendError::Config(format!(
                "hop_success_prob must lie in [0, 1], got {}",
                self.hop_success_prob
            )));
        }
        Ok(())
    }
}

pub struct ScriptedSession {
    cap: ScriptedCapability,
    rng: ChaCha8Rng,
}

impl ScriptedSession {
    pub fn new(cap: ScriptedCapability, episode_key: u64) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(cap.seed, "scripted", episode_key));
        Self { cap, rng }
    }

    fn knows_answer(&self, progress: &ChainProgress, steps: usize) -> bool {
        progress
            .answer_steps
            .first()
            .is_some_and(|&s| steps >= s + self.cap.extraction_depth_bias)
    }

    fn search_text(&mut self, chain: &QuestionChain, progress: &ChainProgress, view: &PromptView) -> String {
        let t = view.steps() + 1;
        match progress.next_relation(chain) {
            Some(rel) if self.rng.random_bool(self.cap.hop_success_prob) => {
                format!("<think>I need the {rel} of {}.</think>\n<search>{rel} of {}</search>", progress.current, progress.current)
            }
            Some(rel) => format!("<think>I am not sure who to look up.</think>\n<search>{rel} lookup {t}</search>"),
            None => {
                let attr = chain.path.last().expect("path is non-empty");
                format!(
                    "<think>Let me double check the {attr}.</think>\n<search>{attr} of {} confirm {t}</search>",
                    progress.current
                )
            }
        }
    }
}

pub(crate) fn answer_text(answer: Option<&str>, steps: usize) -> String {
    match answer {
        Some(a) => format!("<think>The documents state it.</think>\n<answer>{a}</answer>"),
        None => format!(
            "<think>I cannot work it out.</think>\n<answer>{}</answer>",
            WRONG_ANSWERS[steps % WRONG_ANSWERS.len()]
        ),
    }
}

impl PolicySession for ScriptedSession {
    fn generate(&mut self, prompt: &str, _stop: &[&str], _max_new_tokens: usize) -> Result<String, BackendError> {
        let view = read_prompt(prompt);
        let t = view.steps();
        let Some(chain) = parse_question(&view.question) else {
            return Ok(answer_text(None, t));
        };
        let progress = follow_chain(&chain, &view.observations);
        let knows = self.knows_answer(&progress, t);
        let answer = if knows { progress.answer.as_deref() } else { None };
        if view.intermediate {
            return Ok(answer_text(answer, t));
        }
        let search = match view.quota {
            Some(n) => t < n,
            None => view.search_allowed && !knows,
        };
        Ok(if search {
            self.search_text(&chain, &progress, &view)
        } else {
            answer_text(answer, t)
        })
    }
}
