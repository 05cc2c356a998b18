//! Learning stack: actor/critic MLPs with manual backprop, PPO over
//! vectorized rewards with multi-head values, GAE, symmetry regularization,
//! observation normalization, curriculum bookkeeping and checkpointing.

pub mod buffer;
pub mod checkpoint;
pub mod gae;
pub mod grad_check;
pub mod nn;
pub mod norm;
pub mod ppo;
pub mod trainer;

pub use buffer::RolloutBuffer;
pub use checkpoint::{Checkpoint, CheckpointError};
pub use gae::value_targets;
pub use grad_check::grad_check;
pub use nn::{Adam, PolicyNet, ValueNet};
pub use norm::RunningNorm;
pub use ppo::{ppo_update, symmetry_loss, value_loss, Mirrors, NonFiniteLoss, PpoConfig};
pub use trainer::{run_policy_episode, TrainConfig, Trainer};
