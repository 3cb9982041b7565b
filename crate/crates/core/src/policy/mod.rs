//! Text policies. A backend hands out one session per episode; the session
//! turns prompts into tagged text.

pub mod parametric;
pub mod prompt;
pub mod reader;
pub mod remote;
pub mod scripted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use parametric::{AgentModel, Decision, DecisionRecord, Features, ParametricPolicy, ParametricSession};
pub use prompt::{render_prompt, serialize_prefix, PromptError, PromptSet, PromptTemplate, TemplateName};
pub use remote::{RemoteConfig, RemoteSession};
pub use scripted::{ScriptedCapability, ScriptedSession};

use crate::trajectory::{parse_tagged_text, ActionKind, Step};

/// Answers a simulated agent gives when it does not know. None of them
/// survives normalisation as a generated entity name.
pub const WRONG_ANSWERS: [&str; 5] = ["unknown", "no idea", "not stated", "unclear", "cannot tell"];

/// Stop sequences sent with every rollout generation.
pub const ROLLOUT_STOPS: [&str; 2] = ["</search>", "</answer>"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// One episode's conversation with a policy.
pub trait PolicySession {
    fn generate(&mut self, prompt: &str, stop: &[&str], max_new_tokens: usize) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Scripted,
    Remote,
    Parametric,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Scripted => "scripted",
            PolicyKind::Remote => "remote",
            PolicyKind::Parametric => "parametric",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(PolicyKind::Scripted),
            "remote" => Ok(PolicyKind::Remote),
            "parametric" => Ok(PolicyKind::Parametric),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyBackend {
    Scripted(ScriptedCapability),
    Remote(RemoteConfig),
    Parametric { policy: ParametricPolicy, model: AgentModel, greedy: bool },
}

impl PolicyBackend {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicyBackend::Scripted(_) => PolicyKind::Scripted,
            PolicyBackend::Remote(_) => PolicyKind::Remote,
            PolicyBackend::Parametric { .. } => PolicyKind::Parametric,
        }
    }

    /// Opens a session for one episode. `episode_key` identifies the
    /// episode so stochastic backends stay reproducible per question.
    pub fn session(&self, episode_key: u64) -> Result<Box<dyn PolicySession + Send + '_>, BackendError> {
        Ok(match self {
            PolicyBackend::Scripted(cap) => Box::new(ScriptedSession::new(*cap, episode_key)),
            PolicyBackend::Remote(config) => Box::new(RemoteSession::new(config.clone())?),
            PolicyBackend::Parametric { policy, model, greedy } => {
                let mut s = ParametricSession::new(policy, *model, episode_key);
                s.greedy = *greedy;
                Box::new(s)
            }
        })
    }
}

/// Closes a trailing `<search>` or `<answer>` span whose closing tag was
/// consumed as a stop sequence.
pub fn restore_stop(raw: &str) -> String {
    let last_open = ["search", "answer"]
        .iter()
        .filter_map(|t| raw.rfind(&format!("<{t}>")).map(|p| (p, *t)))
        .max();
    match last_open {
        Some((p, tag)) if !raw[p..].contains(&format!("</{tag}>")) => format!("{raw}</{tag}>"),
        _ => raw.to_string(),
    }
}

/// Asks the policy what it would answer given the trajectory so far.
/// A generation without an `<answer>` span yields an empty answer.
pub fn intermediate_answer(
    session: &mut dyn PolicySession,
    prompts: &PromptSet,
    question: &str,
    prefix: &[Step],
    max_new_tokens: usize,
) -> Result<String, BackendError> {
    let prompt = render_prompt(&prompts.intermediate, question, prefix);
    let raw = session.generate(&prompt, &["</answer>"], max_new_tokens)?;
    let turn = parse_tagged_text(&restore_stop(&raw));
    Ok(turn
        .actions
        .into_iter()
        .find(|a| a.kind == ActionKind::Answer)
        .map(|a| a.payload)
        .unwrap_or_default())
}
