//! PPO with GAE for the parametric policy in the synthetic environment.

mod gae;
mod ppo;
mod trainer;

pub use gae::gae_advantages;
pub use ppo::{masked_ppo_loss, surrogate_term, value_loss, ActorParams, PpoSample};
pub use trainer::{
    config_hash, train, warmup_lr, EnvConfig, EnvRetriever, PolicyCheckpoint, TailSummary, TrainOutcome,
    TrainerConfig, TrainingLog, TrainingRow,
};

use crate::reward::RewardError;
use crate::sim::{EpisodeError, TaskGenError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("no trainable decisions")]
    NoTrainable,
    #[error("diverged at iteration {iteration}: mean |theta| = {mean_abs_theta} exceeds {bound}")]
    Diverged { iteration: usize, mean_abs_theta: f64, bound: f64 },
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Tasks(#[from] TaskGenError),
}
