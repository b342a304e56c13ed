//! Deep Q-network machinery: the MLP, replay memory, exploration schedule,
//! Adam training and checkpoints.

mod checkpoint;
mod network;
mod replay;
mod schedule;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use network::{argmax, Dense, Mode, QNetwork, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
pub use replay::{Experience, ReplayBuffer, DEFAULT_CAPACITY};
pub use schedule::ExplorationSchedule;
pub use train::{
    adam_update, bellman_targets, cumulative_reward, loss_and_grads, mse, select_actions,
    AdamState, Learner, TrainConfig, LR_GRID,
};
