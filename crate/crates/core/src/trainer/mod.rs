//! Weak supervision: rewards from executed denotations, iterative maximum
//! likelihood over the best programs found by beam search, then REINFORCE
//! mixed with those programs.

mod config;
mod reward;
mod store;
mod train;

pub use config::TrainConfig;
pub use reward::{evaluate_with, prf, reward_f1, Metrics};
pub use store::{PseudoGoldStore, RewardedProgram};
pub use train::{
    augmented_reinforce, evaluate, iterative_ml, predict, reinforce_gradient, rng_for, train, Baselines, LogRecord,
    Phase, Report, TrainOutcome,
};

use thiserror::Error;

use crate::programmer::ProgrammerError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("gold answer set is empty")]
    EmptyGold,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
    #[error("config: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Programmer(#[from] ProgrammerError),
}
