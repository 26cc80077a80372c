use super::config::GrpoConfig;
use crate::critic::{Critic, CriticReport};
use crate::episode::WorldMemory;
use crate::microworld::{DomainSpec, Segment};
use crate::numerics::{NetParams, RandomSource};
use crate::planner::PlanStep;
use crate::worldmodel::{embed_condition, sample_sde, ContextEncoding, DenoiseTrace, SamplerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RolloutMember {
    pub segment: Segment,
    pub trace: DenoiseTrace,
    pub report: CriticReport,
    pub reward: f64,
}

/// `G` samples for one plan step from one shared starting noise.
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    pub z_k: Vec<f64>,
    pub cond: ContextEncoding,
    pub members: Vec<RolloutMember>,
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn rewards(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.reward).collect()
    }

    /// Index of the highest-reward member; the first one on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, m) in self.members.iter().enumerate() {
            if m.reward > self.members[best].reward {
                best = i;
            }
        }
        best
    }
}

/// `(r - mean) / (std + delta)` with the population std. The deviations are
/// re-centred once so the advantages sum to zero to rounding.
pub fn compute_advantages(rewards: &[f64], delta: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::InvalidArgument(format!("a group needs at least 2 rewards, got {}", rewards.len())));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    let drift = dev.iter().sum::<f64>() / n;
    dev.iter_mut().for_each(|d| *d -= drift);
    let std = (dev.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    Ok(dev.iter().map(|d| d / (std + delta)).collect())
}

/// Samples a group under `theta_old`: one `z_K` for every member, one
/// independent Wiener stream per member.
#[allow(clippy::too_many_arguments)]
pub fn rollout_group(
    theta_old: &NetParams,
    spec: &DomainSpec,
    step: &PlanStep,
    memory: &WorldMemory,
    sampler: &SamplerConfig,
    config: &GrpoConfig,
    critic: &dyn Critic,
    rng: &mut RandomSource,
) -> Result<RolloutGroup> {
    let cond = embed_condition(spec, step, memory)?;
    let z_k = rng.normal_vec(spec.frames * spec.width());
    let streams = (0..config.group_size).map(|_| rng.fork()).collect();
    rollout_with_streams(theta_old, spec, step, cond, z_k, sampler, config, critic, streams)
}

/// [`rollout_group`] with explicit per-member noise streams.
#[allow(clippy::too_many_arguments)]
pub fn rollout_with_streams(
    theta_old: &NetParams,
    spec: &DomainSpec,
    step: &PlanStep,
    cond: ContextEncoding,
    z_k: Vec<f64>,
    sampler: &SamplerConfig,
    config: &GrpoConfig,
    critic: &dyn Critic,
    streams: Vec<RandomSource>,
) -> Result<RolloutGroup> {
    if sampler.eta_scale == 0.0 {
        return Err(Error::Config("group rollouts need eta_scale > 0; the ODE sampler cannot explore".into()));
    }
    if streams.len() < 2 {
        return Err(Error::Config(format!("group size {} must be at least 2", streams.len())));
    }
    let mut members = Vec::with_capacity(streams.len());
    for mut stream in streams {
        let (segment, trace) = sample_sde(theta_old, &cond, &z_k, spec.frames, sampler, &mut stream)?;
        let report = critic.evaluate(spec, &segment, step)?;
        let reward = config.reward.reward(spec, &segment, step, &report)?;
        members.push(RolloutMember { segment, trace, report, reward });
    }
    let rewards: Vec<f64> = members.iter().map(|m| m.reward).collect();
    let advantages = compute_advantages(&rewards, config.delta)?;
    Ok(RolloutGroup { z_k, cond, members, advantages })
}
