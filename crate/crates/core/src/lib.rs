//! A world model that couples a recurrent latent-dynamics core with a
//! differentiable logic engine, plus actor-critic and gradient-planning
//! decision modules, trained on built-in analytic control environments.
//!
//! Everything is plain `f64` on CPU. Differentiable pieces run on a small
//! reverse-mode [`tape`](crate::tape); training is deterministic given the
//! configured seed.

pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod fdcheck;
pub mod feedback;
pub mod harness;
pub mod logic;
pub mod metrics;
pub mod nn;
pub mod planner;
pub mod reasoning;
pub mod replay;
pub mod rng;
pub mod rssm;
pub mod tape;

pub use error::{Error, Result};
