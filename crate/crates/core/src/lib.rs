//! Seeded agent-based simulation of private well-testing decisions.
//!
//! The pipeline runs from a survey-shaped population through preprocessing,
//! random-forest feature selection and TreeSHAP explanations to two DQN
//! agent-based models evaluated under fourteen intervention scenarios.

pub mod awareness;
pub mod cli;
pub mod dqn;
pub mod env;
pub mod error;
pub mod forest;
pub mod manifest;
pub mod population;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod schema;
pub mod shap;
pub mod sim;

pub use error::{Error, Result};
