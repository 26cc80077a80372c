use serde::{Deserialize, Serialize};

use super::suite::{Difficulty, PromptSuite};
use crate::critic::{Critic, Dimension};
use crate::episode::{run_episode_from, EpisodeLog, LoopConfig};
use crate::microworld::DomainSpec;
use crate::numerics::RandomSource;
use crate::planner::Planner;
use crate::worldmodel::SegmentPolicy;
use crate::{Error, Result};

/// Affine map of a [0, 1] critic score onto the 1-5 rating scale.
pub fn to_scale(score: f64) -> f64 {
    1.0 + 4.0 * score.clamp(0.0, 1.0)
}

/// Aggregated action-quality metrics over a set of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub episodes: usize,
    /// Mean per-episode fraction of planned steps executed with their post
    /// literals satisfied.
    pub action_completeness: f64,
    /// 1-5: coherence of every generated segment, less the mean jump at
    /// accepted segment boundaries.
    pub motion_smoothness: f64,
    /// 1-5, or `None` when no generated segment involved a contact target.
    pub object_interaction: Option<f64>,
    /// 1-5: realism of every generated segment.
    pub physical_fidelity: f64,
    pub success_rate: f64,
    pub segments: usize,
    /// Mean max-abs jump between an accepted segment and its conditioning
    /// frame.
    pub boundary_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultySummary {
    pub difficulty: Difficulty,
    #[serde(flatten)]
    pub summary: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub label: String,
    pub domain: String,
    pub suite_hash: String,
    pub suite_seed: u64,
    pub tau: f64,
    pub k_retries: usize,
    pub max_outer_replans: usize,
    pub overall: MetricSummary,
    /// Levels present in the suite, in difficulty order.
    pub per_difficulty: Vec<DifficultySummary>,
    /// Episodes aborted by an internal error; they count as zero completeness.
    pub episode_errors: Vec<String>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Schema(format!("metric report: {e}")))?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for s in std::iter::once(&self.overall).chain(self.per_difficulty.iter().map(|d| &d.summary)) {
            s.validate()?;
        }
        Ok(())
    }
}

impl MetricSummary {
    pub fn validate(&self) -> Result<()> {
        let unit = [self.action_completeness, self.success_rate];
        let scale = [Some(self.motion_smoothness), self.object_interaction, Some(self.physical_fidelity)];
        if unit.iter().any(|v| !(0.0..=1.0).contains(v)) || scale.iter().flatten().any(|v| !(1.0..=5.0).contains(v)) {
            return Err(Error::Schema(format!("metric out of range: {self:?}")));
        }
        Ok(())
    }
}

/// What one episode contributes to the metrics.
#[derive(Debug, Clone)]
struct Outcome {
    difficulty: Difficulty,
    completeness: f64,
    success: bool,
    /// (coherence, realism, interaction if applicable) per generated segment.
    segments: Vec<(f64, f64, Option<f64>)>,
    boundary_deltas: Vec<f64>,
}

impl Outcome {
    fn from_log(difficulty: Difficulty, log: &EpisodeLog) -> Self {
        let segments = log
            .attempts
            .iter()
            .map(|a| {
                let s = &a.report.scores;
                let inter = a.report.interaction_applicable.then(|| s.get(Dimension::ObjectInteraction));
                (s.get(Dimension::TemporalCoherence), s.get(Dimension::PhysicalRealism), inter)
            })
            .collect();
        Self {
            difficulty,
            completeness: log.completeness(),
            success: log.success(),
            segments,
            boundary_deltas: log.boundary_deltas.clone(),
        }
    }

    fn failed(difficulty: Difficulty) -> Self {
        Self { difficulty, completeness: 0.0, success: false, segments: Vec::new(), boundary_deltas: Vec::new() }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize<'a>(outcomes: impl Iterator<Item = &'a Outcome> + Clone) -> MetricSummary {
    let segs = || outcomes.clone().flat_map(|o| o.segments.iter());
    let penalty = mean(outcomes.clone().flat_map(|o| o.boundary_deltas.iter().copied())).unwrap_or(0.0);
    let coherence = mean(segs().map(|s| s.0)).unwrap_or(0.0);
    MetricSummary {
        episodes: outcomes.clone().count(),
        action_completeness: mean(outcomes.clone().map(|o| o.completeness)).unwrap_or(0.0),
        motion_smoothness: to_scale(coherence - penalty),
        object_interaction: mean(segs().filter_map(|s| s.2)).map(to_scale),
        physical_fidelity: to_scale(mean(segs().map(|s| s.1)).unwrap_or(0.0)),
        success_rate: mean(outcomes.clone().map(|o| if o.success { 1.0 } else { 0.0 })).unwrap_or(0.0),
        segments: segs().count(),
        boundary_penalty: penalty,
    }
}

/// Runs one episode per task, concurrently, and aggregates the metrics.
/// Each task gets its own random stream forked from `rng` in task order, so
/// the report does not depend on thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy(
    label: &str,
    spec: &DomainSpec,
    policy: &dyn SegmentPolicy,
    suite: &PromptSuite,
    planner: &dyn Planner,
    critic: &dyn Critic,
    config: &LoopConfig,
    rng: &mut RandomSource,
) -> Result<MetricReport> {
    evaluate_policy_with_workers(label, spec, policy, suite, planner, critic, config, available_workers(), rng)
}

pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// `evaluate_policy` on at most `workers` threads; the report is the same
/// for every worker count.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy_with_workers(
    label: &str,
    spec: &DomainSpec,
    policy: &dyn SegmentPolicy,
    suite: &PromptSuite,
    planner: &dyn Planner,
    critic: &dyn Critic,
    config: &LoopConfig,
    workers: usize,
    rng: &mut RandomSource,
) -> Result<MetricReport> {
    if workers == 0 {
        return Err(Error::Config("need at least one worker".into()));
    }
    if suite.tasks.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty suite".into()));
    }
    if suite.domain != spec.name {
        return Err(Error::InvalidArgument(format!("suite is for domain '{}', not '{}'", suite.domain, spec.name)));
    }
    config.validate()?;
    let streams: Vec<RandomSource> = suite.tasks.iter().map(|_| rng.fork()).collect();
    let workers = workers.min(suite.tasks.len());
    let chunk = suite.tasks.len().div_ceil(workers);
    let jobs: Vec<_> = suite.tasks.iter().zip(streams).collect();
    let results: Vec<(Outcome, Option<String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|(task, stream)| {
                            let mut stream = stream.clone();
                            match run_episode_from(spec, &task.initial, &task.goal, planner, policy, critic, config, &mut stream) {
                                Ok(log) => (Outcome::from_log(task.difficulty, &log), None),
                                Err(e) => (Outcome::failed(task.difficulty), Some(format!("{}: {e}", task.goal.description))),
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let outcomes: Vec<Outcome> = results.iter().map(|r| r.0.clone()).collect();
    let per_difficulty = Difficulty::ALL
        .into_iter()
        .filter(|d| outcomes.iter().any(|o| o.difficulty == *d))
        .map(|d| DifficultySummary { difficulty: d, summary: summarize(outcomes.iter().filter(move |o| o.difficulty == d)) })
        .collect();
    Ok(MetricReport {
        label: label.to_string(),
        domain: spec.name.clone(),
        suite_hash: suite.hash(spec),
        suite_seed: suite.seed,
        tau: config.tau,
        k_retries: config.k_retries,
        max_outer_replans: config.max_outer_replans,
        overall: summarize(outcomes.iter()),
        per_difficulty,
        episode_errors: results.into_iter().filter_map(|r| r.1).collect(),
    })
}
