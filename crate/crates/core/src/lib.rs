//! Step-wise reward shaping for adaptive search depth in retrieval-augmented
//! agents.
//!
//! The crate is organised bottom-up:
//!
//! * [`trajectory`] holds the episode data model, the tagged-text grammar
//!   (`<think>`, `<search>`, `<answer>`, `<information>`) and step validity.
//! * [`metrics`] implements answer normalisation, EM, token F1 and the
//!   dataset-level search depth / efficiency / over-search ratios.
//! * [`reward`] computes format, outcome, efficiency and quality rewards per
//!   step, plus the cumulative-reward-versus-stop-depth curve.
//! * [`retrieval`] is an in-memory BM25 index and an oracle retriever for
//!   synthetic tasks.
//! * [`policy`] defines generation backends (scripted, remote HTTP,
//!   parametric) and the prompt templates.
//! * [`sim`] generates synthetic multi-hop tasks and runs episodes.
//! * [`train`] is a small PPO/GAE trainer over the parametric policy.
//! * [`cli`] wires everything into the `searchdepth` binary.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod policy;
pub mod retrieval;
pub mod reward;
pub mod seed;
pub mod sim;
pub mod train;
pub mod trajectory;

pub use metrics::{exact_match, normalize_answer, token_f1, MetricsReport};
pub use reward::{RewardBreakdown, RewardConstants};
pub use trajectory::{AgentAction, ActionKind, QuestionRecord, Step, Termination, Trajectory};
