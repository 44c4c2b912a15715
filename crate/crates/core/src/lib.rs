//! Black-box verification of rule-based decision support systems.
//!
//! The pipeline enumerates every realistic input of a knowledge base,
//! labels each one with the critiquing engine, induces an exact decision
//! tree from the labeled table, compresses it, and checks the result
//! against the engine again.

pub mod diff;
pub mod dss;
pub mod factor;
pub mod generator;
pub mod kb;
pub mod learner;
mod parallel;
pub mod pipeline;
pub mod render;
pub mod verify;

pub use parallel::default_jobs;
