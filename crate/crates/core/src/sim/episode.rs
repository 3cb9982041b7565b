use serde::{Deserialize, Serialize};

use crate::policy::{
    intermediate_answer, render_prompt, restore_stop, BackendError, PolicySession, PromptError, PromptSet,
    ROLLOUT_STOPS,
};
use crate::retrieval::{format_observation, Retriever, DEFAULT_K};
use crate::trajectory::{check_step_validity, parse_tagged_text, ActionKind, QuestionRecord, Step, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Search steps allowed before the turn that must answer.
    pub max_turns: usize,
    pub k: usize,
    /// Require exactly this many searches, using the matching template.
    pub fixed_depth: Option<usize>,
    pub record_intermediate: bool,
    pub max_new_tokens: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { max_turns: 4, k: DEFAULT_K, fixed_depth: None, record_intermediate: true, max_new_tokens: 512 }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EpisodeError> {
        if self.k == 0 {
            return Err(EpisodeError::Config("k must be at least 1".into()));
        }
        if let Some(n) = self.fixed_depth {
            if n > self.max_turns {
                return Err(EpisodeError::Config(format!(
                    "fixed_depth {n} exceeds max_turns {}",
                    self.max_turns
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    /// The episode can be rerun from scratch once the backend recovers.
    #[error("question {question_id}: backend failed after {completed_steps} step(s): {source}")]
    Backend { question_id: String, completed_steps: usize, source: BackendError },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("episode config: {0}")]
    Config(String),
}

impl EpisodeError {
    pub fn is_resumable(&self) -> bool {
        matches!(self, EpisodeError::Backend { .. })
    }
}

fn rejection_notice(missing: usize) -> String {
    format!("Answer rejected: {missing} more search(es) required before answering.")
}

/// Plays one question to completion: generate, parse, retrieve on search,
/// ask for an intermediate answer, repeat until an answer or the turn limit.
pub fn run_episode(
    session: &mut dyn PolicySession,
    retriever: &dyn Retriever,
    record: &QuestionRecord,
    prompts: &PromptSet,
    config: &EpisodeConfig,
) -> Result<Trajectory, EpisodeError> {
    config.validate()?;
    let template = prompts.for_episode(config.fixed_depth)?;
    let quota = config.fixed_depth.unwrap_or(0);
    let mut steps: Vec<Step> = Vec::new();
    // Searches actually executed; rejected or malformed turns do not count.
    let mut searches = 0;
    let backend_err = |steps: &[Step], source| EpisodeError::Backend {
        question_id: record.id.clone(),
        completed_steps: steps.len(),
        source,
    };

    loop {
        let prompt = render_prompt(template, &record.question, &steps);
        let raw = session
            .generate(&prompt, &ROLLOUT_STOPS, config.max_new_tokens)
            .map_err(|e| backend_err(&steps, e))?;
        let turn = parse_tagged_text(&restore_stop(&raw));
        let decision = if turn.well_formed { turn.decision().cloned() } else { None };

        if let Some(action) = &decision {
            if action.kind == ActionKind::Answer && searches >= quota {
                return Ok(Trajectory::answered(record.id.clone(), steps, action.payload.clone()));
            }
        }
        if steps.len() >= config.max_turns {
            return Ok(Trajectory::unanswered(record.id.clone(), steps));
        }

        let mut step = Step::new(steps.len() + 1, String::new());
        step.think_text = turn.think_text();
        let well_formed = match decision {
            Some(action) if action.kind == ActionKind::Search => {
                let docs = retriever.retrieve(&action.payload, config.k);
                step.retrieved_doc_ids = docs.iter().map(|d| d.id.clone()).collect();
                step.observation_text = format_observation(&docs);
                step.search_query = action.payload;
                searches += 1;
                true
            }
            Some(_) => {
                step.observation_text = rejection_notice(quota - searches);
                false
            }
            None => {
                // Keep whatever query could be recovered; nothing is retrieved.
                if let Some(q) = turn.actions.iter().find(|a| a.kind == ActionKind::Search) {
                    step.search_query = q.payload.clone();
                }
                false
            }
        };
        step.valid = check_step_validity(&step, well_formed, &steps);
        steps.push(step);
        if config.record_intermediate {
            let answer = intermediate_answer(session, prompts, &record.question, &steps, config.max_new_tokens)
                .map_err(|e| backend_err(&steps[..steps.len() - 1], e))?;
            steps.last_mut().expect("just pushed").intermediate_answer = Some(answer);
        }
    }
}
