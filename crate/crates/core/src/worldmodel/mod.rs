//! The action-conditioned generative policy: a rectified-flow velocity
//! network over whole segments, ODE and reverse-SDE samplers with per-step
//! transition densities, supervised flow-matching training, and the
//! policies the loop can plug in.

mod condition;
mod policy;
mod sampler;
mod sft;

pub use condition::{embed_condition, encode_condition, quoted_literals, ContextEncoding, MAX_STEP_INDEX};
pub use policy::{
    load_policy, manifest_path, save_policy, FrozenPolicy, LearnedPolicy, OraclePolicy, PolicyBundle, PolicyManifest,
    SegmentPolicy,
};
pub use sampler::{
    sample_ode, sample_sde, score_term, transition_logprob, transition_logprob_grad, velocity, DenoiseTrace, SamplerConfig,
    TraceStep, TIME_FLOOR,
};
pub(crate) use sampler::mean_cached;
pub use sft::{
    demonstrations, flow_matching_loss, flow_matching_loss_grad, init_velocity_net, sft_train, velocity_net_sizes,
    DemoConfig, SftConfig, SftExample, SftReport, HIDDEN_LAYERS,
};
