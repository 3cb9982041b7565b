//! Episode data model: questions, agent actions, search steps and whole
//! trajectories, together with the tagged-text grammar and validity rules.

mod grammar;
mod jsonl;
mod validity;

use serde::{Deserialize, Serialize};

pub use grammar::{parse_tagged_text, render_actions, ParsedTurn};
pub use jsonl::{
    from_json_str, load_dataset, read_jsonl_lines, read_trajectories, write_jsonl,
    write_trajectories, Dataset, JsonlError, SchemaError,
};
pub use validity::check_step_validity;

/// One question with every acceptable answer string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    #[serde(rename = "golden_answers")]
    pub gold_answers: Vec<String>,
}

impl QuestionRecord {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        gold_answers: Vec<String>,
    ) -> Result<Self, SchemaError> {
        let record = Self {
            id: id.into(),
            question: question.into(),
            gold_answers,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.gold_answers.is_empty() {
            return Err(SchemaError::new("golden_answers", "at least one answer is required"));
        }
        if let Some(i) = self.gold_answers.iter().position(|a| a.trim().is_empty()) {
            return Err(SchemaError::new(
                format!("golden_answers[{i}]"),
                "answer is empty after trimming",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Think,
    Search,
    Answer,
}

impl ActionKind {
    pub fn tag(self) -> &'static str {
        match self {
            ActionKind::Think => "think",
            ActionKind::Search => "search",
            ActionKind::Answer => "answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub kind: ActionKind,
    pub payload: String,
}

impl AgentAction {
    pub fn think(payload: impl Into<String>) -> Self {
        Self { kind: ActionKind::Think, payload: payload.into() }
    }

    pub fn search(payload: impl Into<String>) -> Self {
        Self { kind: ActionKind::Search, payload: payload.into() }
    }

    pub fn answer(payload: impl Into<String>) -> Self {
        Self { kind: ActionKind::Answer, payload: payload.into() }
    }
}

/// Reward components attached to one position of a scored trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRewards {
    pub format: f64,
    pub outcome: f64,
    pub efficiency: f64,
    pub quality: f64,
    pub overall: f64,
}

/// A single search step. `index` is 1-based; the answering turn is not a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub index: usize,
    #[serde(rename = "think")]
    pub think_text: String,
    pub search_query: String,
    pub retrieved_doc_ids: Vec<String>,
    #[serde(rename = "observation")]
    pub observation_text: String,
    pub intermediate_answer: Option<String>,
    pub valid: bool,
    pub rewards: Option<StepRewards>,
}

impl Step {
    pub fn new(index: usize, search_query: impl Into<String>) -> Self {
        Self {
            index,
            think_text: String::new(),
            search_query: search_query.into(),
            retrieved_doc_ids: Vec::new(),
            observation_text: String::new(),
            intermediate_answer: None,
            valid: true,
            rewards: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    MaxTurnsReached,
}

/// Sentinel for "no step ever produced a correct intermediate answer".
pub const NO_CAPABILITY_DEPTH: i64 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub question_id: String,
    pub steps: Vec<Step>,
    pub final_answer: Option<String>,
    pub termination: Termination,
    pub t_c: i64,
    /// Rewards of the answering turn, present once the trajectory is scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_rewards: Option<StepRewards>,
}

impl Trajectory {
    pub fn answered(question_id: impl Into<String>, steps: Vec<Step>, answer: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            steps,
            final_answer: Some(answer.into()),
            termination: Termination::Answered,
            t_c: NO_CAPABILITY_DEPTH,
            terminal_rewards: None,
        }
    }

    pub fn unanswered(question_id: impl Into<String>, steps: Vec<Step>) -> Self {
        Self {
            question_id: question_id.into(),
            steps,
            final_answer: None,
            termination: Termination::MaxTurnsReached,
            t_c: NO_CAPABILITY_DEPTH,
            terminal_rewards: None,
        }
    }

    /// Number of search steps (the search depth of this episode).
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn is_scored(&self) -> bool {
        self.terminal_rewards.is_some() && self.steps.iter().all(|s| s.rewards.is_some())
    }

    /// Structural invariants that do not need the gold answers.
    pub fn validate(&self) -> Result<(), SchemaError> {
        match (self.termination, &self.final_answer) {
            (Termination::Answered, None) => {
                return Err(SchemaError::new("final_answer", "answered trajectory has no final answer"))
            }
            (Termination::MaxTurnsReached, Some(_)) => {
                return Err(SchemaError::new(
                    "final_answer",
                    "trajectory that hit the turn limit cannot carry a final answer",
                ))
            }
            _ => {}
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.index != i + 1 {
                return Err(SchemaError::new(
                    format!("steps[{i}].index"),
                    format!("expected {}, found {}", i + 1, step.index),
                ));
            }
        }
        let depth = self.steps.len() as i64;
        if self.t_c != NO_CAPABILITY_DEPTH && !(1..=depth).contains(&self.t_c) {
            return Err(SchemaError::new(
                "t_c",
                format!("must be -1 or within 1..={depth}, found {}", self.t_c),
            ));
        }
        if self.t_c >= 1 && self.steps[(self.t_c - 1) as usize].intermediate_answer.is_none() {
            return Err(SchemaError::new(
                "t_c",
                format!("step {} has no intermediate answer", self.t_c),
            ));
        }
        Ok(())
    }

    /// Invariants that need the question's gold answers: `t_c` must point at
    /// an exact-match intermediate answer.
    pub fn validate_against(&self, record: &QuestionRecord) -> Result<(), SchemaError> {
        self.validate()?;
        if self.question_id != record.id {
            return Err(SchemaError::new("question_id", "does not match the dataset record"));
        }
        if self.t_c >= 1 {
            let answer = self.steps[(self.t_c - 1) as usize]
                .intermediate_answer
                .as_deref()
                .unwrap_or_default();
            if crate::metrics::exact_match(answer, &record.gold_answers) == 0 {
                return Err(SchemaError::new(
                    "t_c",
                    format!("intermediate answer at step {} does not match any gold answer", self.t_c),
                ));
            }
        }
        Ok(())
    }
}
