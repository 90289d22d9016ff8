//! Learning-based autonomous parking: a kinematic parking simulator, a
//! from-scratch Soft Actor-Critic learner and a Hybrid A* baseline.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod nn;
pub mod output;
pub mod planner;
pub mod render;
pub mod sac;
pub mod seeding;
pub mod sim;

pub use error::{Error, Result};
