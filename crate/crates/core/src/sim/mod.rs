//! The two agent-based models: monthly episodes over a cohort of agents,
//! DQN training to convergence, and scenario sweeps fine-tuned from a
//! trained baseline.

mod convergence;
mod run;
mod state;
mod sweep;
mod world;

pub use convergence::{ConvergenceConfig, ConvergenceTracker};
pub use run::{
    fine_tune_run, train_run, EpisodeMetrics, Model, Progress, RunCheckpoint, RunResult, SimConfig, Trainer, MONTHS,
};
pub use state::{advance_dynamics, encode_state, encode_states, STATE_EXTRA};
pub use sweep::{sweep_scenarios, train_baselines, BaselineRun, Baselines, CellResult, ScenarioAggregate, Stat};
pub use world::{BarrierSpec, Cohort, World, WorldConfig};
