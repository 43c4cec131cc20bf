//! Actor-critic reinforcement learning with independently configured actor
//! and critic networks.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numeric
//! parts: a small feed-forward network engine with exact gradients, two
//! seedable environments, the DDPG/TD3/SAC learners, and the two-phase
//! search for the smallest actor that still solves a task. File formats,
//! parallel execution and the command line live in `minactor`.

#![no_std]

extern crate alloc;

pub mod algos;
pub mod envs;
mod error;
pub(crate) mod math;
pub mod nn;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
