//! Segment critique: five-dimension programmatic scoring, scalar
//! aggregation, diagnostic feedback, instruction revision, and a
//! Bradley-Terry reward model over segment features.

mod evaluate;
mod feedback;
mod reward_model;

pub use evaluate::{
    aggregate, evaluate, interaction_applicable, Critic, CriticConfig, CriticReport, CriticWeights, Dimension, DimensionScores,
    ProgrammaticCritic, COHERENCE_SCALE, CONTACT_RADIUS, DIMENSIONS, MAX_FRAME_DELTA, PROGRESS_FRACTION,
    PROGRESS_SLACK, VALUE_RANGE,
};
pub use feedback::{revise_instruction, FeedbackTag};
pub use reward_model::{
    bt_loss, bt_loss_grad, build_preference_pairs, feature_width, pairwise_accuracy, rm_score, rm_train,
    segment_features, synthetic_pairs, PairSource, PreferencePair, RewardModelParams, RmTrainConfig, RmTrainReport,
};
