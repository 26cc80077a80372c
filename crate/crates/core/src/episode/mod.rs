//! The closed think-act-reflect loop: plan, generate, critique, refine the
//! instruction on rejection, replan when refinement is exhausted, and keep
//! accepted transitions in an append-only memory.

mod engine;
mod memory;

pub use engine::{
    inner_refine, outer_replan, run_episode, run_episode_from, Attempt, AttemptRecord, EpisodeLog, EpisodeStatus, LoopConfig, LoopMode,
    Refinement, ReplanEvent,
};
pub use memory::{memory_update, Transition, WorldMemory};
