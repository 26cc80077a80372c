use super::config::{curriculum_schedule, GrpoConfig};
use super::objective::grpo_update;
use super::rollout::rollout_group;
use crate::bench::Task;
use crate::critic::{Critic, DIMENSIONS};
use crate::episode::WorldMemory;
use crate::microworld::DomainSpec;
use crate::numerics::{OptState, RandomSource};
use crate::planner::Planner;
use crate::worldmodel::{PolicyBundle, SamplerConfig};
use crate::{Error, Result};

/// Per-iteration training statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingRecord {
    pub iteration: usize,
    pub curriculum_level: usize,
    pub goal: String,
    pub plan_len: usize,
    /// Mean reward over every member of every group this iteration.
    pub mean_reward: f64,
    /// Mean critic dimension scores over the same members.
    pub dims: [f64; 5],
    pub kl_mean: f64,
    pub clip_fraction: f64,
    pub skipped_updates: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
    /// Notable non-fatal events, such as goals the planner rejected.
    pub events: Vec<String>,
}

/// CSV columns, in order.
pub const TRAINING_COLUMNS: [&str; 10] = [
    "iteration",
    "mean_reward",
    "adherence_mean",
    "coherence_mean",
    "kl_mean",
    "clip_fraction",
    "curriculum_level",
    "interaction_mean",
    "goal_mean",
    "realism_mean",
];

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = TRAINING_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let d = r.dims;
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6e},{:.6},{},{:.6},{:.6},{:.6}\n",
                r.iteration, r.mean_reward, d[0], d[3], r.kl_mean, r.clip_fraction, r.curriculum_level, d[1], d[2], d[4]
            ));
        }
        out
    }

    /// Named per-iteration series for plotting.
    pub fn series(&self) -> Vec<(&'static str, Vec<f64>)> {
        let col = |f: &dyn Fn(&TrainingRecord) -> f64| self.records.iter().map(f).collect::<Vec<_>>();
        vec![
            ("mean_reward", col(&|r| r.mean_reward)),
            ("adherence_mean", col(&|r| r.dims[0])),
            ("coherence_mean", col(&|r| r.dims[3])),
            ("kl_mean", col(&|r| r.kl_mean)),
            ("clip_fraction", col(&|r| r.clip_fraction)),
            ("curriculum_level", col(&|r| r.curriculum_level as f64)),
        ]
    }
}

/// Trailing means over full windows: `values.len() - window + 1` entries.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    values.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

const MAX_GOAL_DRAWS: usize = 100;

/// Where a training run stands: parameters, optimizer moments and the
/// number of iterations already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub bundle: PolicyBundle,
    pub opt: OptState,
    pub completed: usize,
}

impl TrainState {
    pub fn new(bundle: PolicyBundle) -> Self {
        let opt = OptState::new(bundle.theta.len());
        Self { bundle, opt, completed: 0 }
    }
}

/// Closed-loop GRPO. Each iteration syncs `theta_old`, draws a task allowed
/// by the curriculum, plans it, and walks the plan: one shared-noise group
/// and one update per step, then memory advances with the best member
/// whatever its reward.
#[allow(clippy::too_many_arguments)]
pub fn train(
    bundle: PolicyBundle,
    spec: &DomainSpec,
    planner: &dyn Planner,
    critic: &dyn Critic,
    tasks: &[Task],
    sampler: &SamplerConfig,
    config: &GrpoConfig,
    rng: &mut RandomSource,
) -> Result<(PolicyBundle, TrainingLog)> {
    let root = rng.fork();
    let mut state = TrainState::new(bundle);
    let mut log = TrainingLog::default();
    train_until(&mut state, config.iterations, spec, planner, critic, tasks, sampler, config, &root, &mut log)?;
    Ok((state.bundle, log))
}

/// Runs iterations `state.completed + 1 ..= until`, appending to `log`.
/// Iteration `i` draws from `root.split(i)` only, so stopping and resuming
/// from a saved state reproduces an uninterrupted run.
#[allow(clippy::too_many_arguments)]
pub fn train_until(
    state: &mut TrainState,
    until: usize,
    spec: &DomainSpec,
    planner: &dyn Planner,
    critic: &dyn Critic,
    tasks: &[Task],
    sampler: &SamplerConfig,
    config: &GrpoConfig,
    root: &RandomSource,
    log: &mut TrainingLog,
) -> Result<()> {
    config.validate()?;
    sampler.validate()?;
    if until > config.iterations {
        return Err(Error::Config(format!("cannot train to iteration {until} of {}", config.iterations)));
    }
    if state.opt.m.len() != state.bundle.theta.len() {
        return Err(Error::Shape(format!("optimizer state for {} params, policy has {}", state.opt.m.len(), state.bundle.theta.len())));
    }
    for iteration in state.completed + 1..=until {
        let mut rng = root.split(iteration as u64);
        let rng = &mut rng;
        let level = curriculum_schedule(&config.curriculum, iteration)?;
        let pool: Vec<&Task> = tasks.iter().filter(|t| t.plan_len >= 1 && t.plan_len <= level).collect();
        if pool.is_empty() {
            return Err(Error::Config(format!("no training task has a plan of at most {level} steps")));
        }
        let mut drawn = None;
        for _ in 0..MAX_GOAL_DRAWS {
            let task = pool[rng.below(pool.len())];
            match planner.plan(spec, &task.goal, &task.initial) {
                Ok(plan) if !plan.is_empty() && plan.len() <= level => {
                    drawn = Some((task, plan));
                    break;
                }
                Ok(plan) => log.events.push(format!(
                    "iteration {iteration}: plan of {} steps for '{}' outside level {level}; resampled",
                    plan.len(),
                    task.goal.description
                )),
                Err(Error::NoPlan(msg)) => {
                    log.events.push(format!("iteration {iteration}: no plan for '{}' ({msg}); resampled", task.goal.description))
                }
                Err(e) => return Err(e),
            }
        }
        let (task, plan) = drawn.ok_or_else(|| Error::NoPlan(format!("no plannable task at level {level}")))?;

        state.bundle.sync_old();
        let mut memory = WorldMemory::new(spec, task.initial.clone());
        let (mut reward_sum, mut dims, mut members) = (0.0, [0.0; 5], 0usize);
        let (mut kl_sum, mut clip_sum, mut updates, mut skipped) = (0.0, 0.0, 0usize, 0usize);
        for step in &plan.steps {
            let group = rollout_group(&state.bundle.theta_old, spec, step, &memory, sampler, config, critic, rng)?;
            for m in &group.members {
                reward_sum += m.reward;
                for (d, dim) in dims.iter_mut().zip(DIMENSIONS) {
                    *d += m.report.scores.get(dim);
                }
                members += 1;
            }
            let (obj, _) = grpo_update(&mut state.bundle, &group, sampler, config, &mut state.opt)?;
            if obj.dropped == group.members.len() {
                skipped += 1;
            } else {
                kl_sum += obj.kl;
                clip_sum += obj.clip_fraction;
                updates += 1;
            }
            let best = group.best();
            let m = group.members.into_iter().nth(best).expect("best index in range");
            memory.advance(spec, step, m.segment, m.reward)?;
        }
        let per = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
        let record = TrainingRecord {
            iteration,
            curriculum_level: level,
            goal: task.goal.description.clone(),
            plan_len: plan.len(),
            mean_reward: per(reward_sum, members),
            dims: dims.map(|d| per(d, members)),
            kl_mean: per(kl_sum, updates),
            clip_fraction: per(clip_sum, updates),
            skipped_updates: skipped,
        };
        log::info!(
            "grpo iteration {iteration}: level {level}, reward {:.4}, kl {:.3e}, clip {:.3}",
            record.mean_reward,
            record.kl_mean,
            record.clip_fraction
        );
        log.records.push(record);
        state.completed = iteration;
    }
    Ok(())
}
