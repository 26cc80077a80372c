//! Closed-loop plan / generate / critique toolkit for action-conditioned
//! world models on symbolic micro-worlds.
//!
//! A [`planner`] decomposes goals into operator steps with pre- and
//! post-conditions, a rectified-flow [`worldmodel`] generates one trajectory
//! segment per step, a [`critic`] scores and diagnoses each segment, and the
//! [`episode`] engine ties them together with inner (regenerate) and outer
//! (replan) repair loops. [`grpo`] fine-tunes the generator from critic
//! rewards with shared-noise group rollouts; [`bench`] measures the result.

pub mod bench;
pub mod critic;
pub mod episode;
pub mod error;
pub mod gateway;
pub mod grpo;
pub mod microworld;
pub mod numerics;
pub mod planner;
pub mod worldmodel;
pub mod cli;

pub use error::{Error, Result};
