//! Post-hoc rule summaries of a gridworld agent's policy.
//!
//! The pipeline runs in four stages: train a Q-learning agent on seeded lava
//! gridworlds, roll it out on held-out layouts to collect feature/action
//! traces, fit two-stage Boolean decision rules (DNF) that predict the
//! agent's actions, and feed the learned rules back as action masks.

pub mod agent;
pub mod bdr;
pub mod config;
pub mod error;
pub mod gridworld;
pub mod guardrail;
pub mod pipeline;
pub mod summary;
pub mod trace;

pub use error::{Error, Result};
