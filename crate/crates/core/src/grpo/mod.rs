//! Group-relative policy optimization of the flow policy from critic
//! rewards: shared-noise group rollouts, group-normalized advantages, a
//! per-denoising-step clipped surrogate with an analytic KL pull toward the
//! supervised reference, and a plan-length curriculum.

mod config;
mod objective;
mod rollout;
mod train;

#[cfg(test)]
mod tests;

pub use config::{curriculum_schedule, Curriculum, GrpoConfig, RewardSource};
pub use objective::{grpo_objective, grpo_update, kl_term, surrogate_term, Objective};
pub use rollout::{compute_advantages, rollout_group, rollout_with_streams, RolloutGroup, RolloutMember};
pub use train::{moving_average, train, train_until, TrainState, TrainingLog, TrainingRecord, TRAINING_COLUMNS};
