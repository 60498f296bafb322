//! Meta-reinforcement learning by model identification and experience
//! relabeling.
//!
//! A context-conditioned probabilistic dynamics/reward model is
//! meta-trained so that a few gradient steps on its latent context identify
//! a new task. A context-conditioned soft actor-critic is trained alongside
//! it. At test time the model is adapted further and used to relabel
//! replay data gathered on other tasks, producing synthetic experience for
//! the new task.

pub mod diffcore;
pub mod dynmodel;
pub mod envs;
pub mod error;
pub mod harness;
pub mod orchestrate;
pub mod policy;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
