use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::condition::{embed_condition, ContextEncoding};
use super::sampler::{sample_ode, sample_sde, SamplerConfig};
use crate::episode::WorldMemory;
use crate::microworld::{reference_segment, DomainSpec, Segment};
use crate::numerics::{read_params, write_params, NetParams, RandomSource};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Produces one segment for a plan step given the accepted history.
pub trait SegmentPolicy: Sync {
    fn generate(&self, spec: &DomainSpec, step: &PlanStep, memory: &WorldMemory, rng: &mut RandomSource) -> Result<Segment>;
}

/// The learned world model: reverse-SDE sampling from fresh noise (plain
/// ODE integration when `eta_scale` is 0).
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub params: NetParams,
    pub sampler: SamplerConfig,
}

impl LearnedPolicy {
    pub fn sample(&self, spec: &DomainSpec, cond: &ContextEncoding, rng: &mut RandomSource) -> Result<Segment> {
        let z_k = rng.normal_vec(spec.frames * spec.width());
        if self.sampler.eta_scale == 0.0 {
            sample_ode(&self.params, cond, &z_k, spec.frames, &self.sampler)
        } else {
            Ok(sample_sde(&self.params, cond, &z_k, spec.frames, &self.sampler, rng)?.0)
        }
    }
}

impl SegmentPolicy for LearnedPolicy {
    fn generate(&self, spec: &DomainSpec, step: &PlanStep, memory: &WorldMemory, rng: &mut RandomSource) -> Result<Segment> {
        let cond = embed_condition(spec, step, memory)?;
        self.sample(spec, &cond, rng)
    }
}

/// Demonstration generator used as a policy: the upper bound any learned
/// policy is measured against.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy {
    pub jitter: f64,
}

impl SegmentPolicy for OraclePolicy {
    fn generate(&self, spec: &DomainSpec, step: &PlanStep, memory: &WorldMemory, rng: &mut RandomSource) -> Result<Segment> {
        reference_segment(spec, memory.state(), step.operator, spec.frames, self.jitter, rng)
    }
}

/// Repeats the last accepted frame: nothing ever happens.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenPolicy;

impl SegmentPolicy for FrozenPolicy {
    fn generate(&self, spec: &DomainSpec, _: &PlanStep, memory: &WorldMemory, _: &mut RandomSource) -> Result<Segment> {
        Segment::frozen(memory.last_frame(), spec.frames)
    }
}

/// Current, sampling and reference parameters for policy optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBundle {
    pub theta: NetParams,
    pub theta_old: NetParams,
    pub reference: NetParams,
}

impl PolicyBundle {
    /// All three copies start from the supervised parameters.
    pub fn from_sft(params: NetParams) -> Self {
        Self { theta: params.clone(), theta_old: params.clone(), reference: params }
    }

    /// `theta_old <- theta`.
    pub fn sync_old(&mut self) {
        self.theta_old = self.theta.clone();
    }
}

/// Sidecar written next to every policy checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyManifest {
    pub domain: String,
    pub domain_hash: String,
    pub frames: usize,
    pub width: usize,
    pub k: usize,
    pub eta_scale: f64,
    pub delta: f64,
    /// GRPO iterations already applied (0 for a supervised checkpoint).
    #[serde(default)]
    pub iteration: usize,
}

impl PolicyManifest {
    pub fn new(spec: &DomainSpec, sampler: &SamplerConfig, iteration: usize) -> Self {
        Self {
            domain: spec.name.clone(),
            domain_hash: spec.hash().to_string(),
            frames: spec.frames,
            width: spec.width(),
            k: sampler.k,
            eta_scale: sampler.eta_scale,
            delta: sampler.delta,
            iteration,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig { k: self.k, eta_scale: self.eta_scale, delta: self.delta }
    }
}

/// `policy.bin` -> `policy.bin.json`.
pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn save_policy(path: &Path, params: &NetParams, manifest: &PolicyManifest) -> Result<()> {
    write_params(path, params)?;
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(manifest_path(path), text + "\n")?;
    Ok(())
}

/// Loads a checkpoint and its manifest, refusing when the manifest does not
/// match the domain or, if given, the expected sampler settings.
pub fn load_policy(path: &Path, spec: &DomainSpec, expected: Option<&SamplerConfig>) -> Result<(NetParams, PolicyManifest)> {
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath)
        .map_err(|e| Error::Checkpoint(format!("cannot read manifest {}: {e}", mpath.display())))?;
    let manifest: PolicyManifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("manifest {}: {e}", mpath.display())))?;
    let mismatch = |what: &str, want: String, got: String| {
        Err(Error::Checkpoint(format!("checkpoint {what} is {got}, expected {want}")))
    };
    if manifest.domain_hash != spec.hash() {
        return mismatch("domain hash", spec.hash().to_string(), manifest.domain_hash.clone());
    }
    if manifest.frames != spec.frames || manifest.width != spec.width() {
        return mismatch(
            "segment shape",
            format!("{}x{}", spec.frames, spec.width()),
            format!("{}x{}", manifest.frames, manifest.width),
        );
    }
    if let Some(s) = expected {
        if s.k != manifest.k || s.eta_scale != manifest.eta_scale {
            return mismatch(
                "sampler (K, eta_scale)",
                format!("({}, {})", s.k, s.eta_scale),
                format!("({}, {})", manifest.k, manifest.eta_scale),
            );
        }
    }
    let params = read_params(path)?;
    if params.sizes() != super::sft::velocity_net_sizes(spec).as_slice() || !params.has_skip() {
        return Err(Error::Checkpoint(format!("network layout {:?} does not fit domain '{}'", params.sizes(), spec.name)));
    }
    Ok((params, manifest))
}
