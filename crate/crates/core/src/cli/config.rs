use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::critic::{build_preference_pairs, rm_train, CriticConfig, CriticWeights, RmTrainConfig};
use crate::episode::LoopConfig;
use crate::gateway::{AgentBackend, RemoteConfig};
use crate::grpo::{Curriculum, GrpoConfig, RewardSource};
use crate::microworld::{load_domain, DomainSpec};
use crate::numerics::RandomSource;
use crate::worldmodel::{SamplerConfig, SftConfig};
use crate::{Error, Result};

/// Everything a run depends on. Missing keys take their defaults; the fully
/// resolved copy is written as `config.toml` into every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled domain name or path to a domain TOML file.
    pub domain: String,
    pub seed: u64,
    /// Evaluation threads; 0 means every available core.
    pub workers: usize,
    pub out: PathBuf,
    #[serde(rename = "loop")]
    pub loop_: LoopSection,
    pub sampler: SamplerSection,
    pub critic: CriticSection,
    pub sft: SftSection,
    pub grpo: GrpoSection,
    pub backend: BackendSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: "kitchen".into(),
            seed: 0,
            workers: 0,
            out: PathBuf::from("runs/latest"),
            loop_: LoopSection::default(),
            sampler: SamplerSection::default(),
            critic: CriticSection::default(),
            sft: SftSection::default(),
            grpo: GrpoSection::default(),
            backend: BackendSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopSection {
    pub tau: f64,
    pub k_retries: usize,
    pub max_outer_replans: usize,
    pub max_total_segments: usize,
}

impl Default for LoopSection {
    fn default() -> Self {
        let c = LoopConfig::default();
        Self { tau: c.tau, k_retries: c.k_retries, max_outer_replans: c.max_outer_replans, max_total_segments: c.max_total_segments }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub k: usize,
    pub eta_scale: f64,
    pub delta: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let c = SamplerConfig::default();
        Self { k: c.k, eta_scale: c.eta_scale, delta: c.delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticSection {
    /// Adherence, interaction, goal, coherence, realism.
    pub weights: [f64; 5],
}

impl Default for CriticSection {
    fn default() -> Self {
        Self { weights: CriticWeights::default().0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftSection {
    pub demos: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for SftSection {
    fn default() -> Self {
        let c = SftConfig::default();
        Self { demos: 200, epochs: c.epochs, lr: c.lr, batch_size: c.batch_size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoSection {
    pub group_size: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub delta: f64,
    pub lr: f64,
    pub iterations: usize,
    /// `start:max_len` pairs; empty means thirds of `iterations` at 1, 3, 5.
    pub curriculum: String,
    /// `programmatic`, `adherence` or `blended`.
    pub reward: String,
    /// Reward-model share of a blended reward.
    pub blend_weight: f64,
    /// Preference pairs the blended reward model is trained on.
    pub rm_pairs: usize,
    /// Size of the training goal pool.
    pub train_tasks: usize,
    /// Iterations between checkpoints.
    pub checkpoint_every: usize,
}

impl Default for GrpoSection {
    fn default() -> Self {
        let c = GrpoConfig::default();
        Self {
            group_size: c.group_size,
            epsilon: c.epsilon,
            beta: c.beta,
            delta: c.delta,
            lr: c.lr,
            iterations: c.iterations,
            curriculum: String::new(),
            reward: "programmatic".into(),
            blend_weight: 0.5,
            rm_pairs: 2000,
            train_tasks: 300,
            checkpoint_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    /// `builtin` or `remote`.
    pub kind: String,
    pub base_url: String,
    pub timeout_ms: u64,
    pub retries: u32,
    /// Environment variable holding the bearer token.
    pub token_env: Option<String>,
}

impl Default for BackendSection {
    fn default() -> Self {
        let r = RemoteConfig::new("http://127.0.0.1:8080");
        Self { kind: "builtin".into(), base_url: r.base_url, timeout_ms: r.timeout_ms, retries: r.retries, token_env: None }
    }
}

/// Seed streams, one per consumer, so commands do not share randomness.
pub mod streams {
    pub const SFT: u64 = 1;
    pub const TASKS: u64 = 2;
    pub const GRPO: u64 = 3;
    pub const BENCH: u64 = 4;
    pub const REWARD_MODEL: u64 = 5;
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_path_buf(), message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checks every section; called once all overrides are applied.
    pub fn validate(&self) -> Result<()> {
        self.loop_config().validate()?;
        self.sampler_config().validate()?;
        self.critic_config().validate()?;
        self.grpo_base()?.validate()?;
        self.backend()?;
        if self.sft.batch_size == 0 {
            return Err(Error::Config("sft batch_size must be positive".into()));
        }
        if self.grpo.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be positive".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        if self.domain.ends_with(".toml") || self.domain.contains('/') {
            load_domain(Path::new(&self.domain))
        } else {
            DomainSpec::bundled(&self.domain)
        }
    }

    /// Worker count, bounded by the available cores.
    pub fn resolved_workers(&self) -> usize {
        let cores = crate::bench::available_workers();
        if self.workers == 0 {
            cores
        } else {
            self.workers.min(cores)
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        let l = &self.loop_;
        LoopConfig { tau: l.tau, k_retries: l.k_retries, max_outer_replans: l.max_outer_replans, max_total_segments: l.max_total_segments }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig { k: self.sampler.k, eta_scale: self.sampler.eta_scale, delta: self.sampler.delta }
    }

    /// The critic accepts at the loop threshold.
    pub fn critic_config(&self) -> CriticConfig {
        CriticConfig { weights: CriticWeights(self.critic.weights), tau: self.loop_.tau }
    }

    pub fn sft_config(&self) -> SftConfig {
        SftConfig { epochs: self.sft.epochs, lr: self.sft.lr, batch_size: self.sft.batch_size }
    }

    pub fn curriculum(&self) -> Result<Curriculum> {
        if self.grpo.curriculum.trim().is_empty() {
            Ok(Curriculum::thirds(self.grpo.iterations))
        } else {
            Curriculum::parse(&self.grpo.curriculum)
        }
    }

    /// GRPO settings with the reward source left programmatic.
    fn grpo_base(&self) -> Result<GrpoConfig> {
        let g = &self.grpo;
        if !["programmatic", "adherence", "blended"].contains(&g.reward.as_str()) {
            return Err(Error::Config(format!("unknown reward source '{}'", g.reward)));
        }
        Ok(GrpoConfig {
            group_size: g.group_size,
            epsilon: g.epsilon,
            beta: g.beta,
            delta: g.delta,
            lr: g.lr,
            iterations: g.iterations,
            curriculum: self.curriculum()?,
            reward: RewardSource::Programmatic,
        })
    }

    /// Full GRPO settings. A blended reward trains its reward model here,
    /// from the run seed.
    pub fn grpo_config(&self, spec: &DomainSpec) -> Result<GrpoConfig> {
        let mut config = self.grpo_base()?;
        config.reward = match self.grpo.reward.as_str() {
            "adherence" => RewardSource::Adherence,
            "blended" => {
                let mut rng = RandomSource::new(self.seed, streams::REWARD_MODEL);
                let pairs = build_preference_pairs(spec, self.grpo.rm_pairs, &mut rng)?;
                let report = rm_train(&pairs, &RmTrainConfig::default(), &mut rng)?;
                log::info!("reward model held-out accuracy {:?}", report.holdout_accuracy);
                RewardSource::Blended { model: report.params, weight: self.grpo.blend_weight }
            }
            _ => RewardSource::Programmatic,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn backend(&self) -> Result<AgentBackend> {
        let b = &self.backend;
        match b.kind.as_str() {
            "builtin" => Ok(AgentBackend::Builtin),
            "remote" => {
                let remote =
                    RemoteConfig { base_url: b.base_url.clone(), timeout_ms: b.timeout_ms, retries: b.retries, token_env: b.token_env.clone() };
                remote.validate()?;
                Ok(AgentBackend::Remote(remote))
            }
            other => Err(Error::Config(format!("unknown backend '{other}' (builtin or remote)"))),
        }
    }
}
