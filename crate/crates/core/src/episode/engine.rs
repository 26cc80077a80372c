use std::time::Instant;

use serde_json::json;

use super::memory::{memory_update, WorldMemory};
use crate::critic::{Critic, CriticReport, FeedbackTag};
use crate::microworld::{decode_frame, DomainSpec, Literal, Segment, SymbolicState, DECODE_THRESHOLD};
use crate::numerics::RandomSource;
use crate::planner::{FailureContext, Goal, PlanSequence, PlanStep, Planner};
use crate::worldmodel::SegmentPolicy;
use crate::{Error, Result};

/// Budgets and threshold of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    /// Acceptance threshold on the critic scalar.
    pub tau: f64,
    /// Regenerations after the first attempt of a step, per plan version.
    pub k_retries: usize,
    pub max_outer_replans: usize,
    /// Hard cap on generated segments per episode.
    pub max_total_segments: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { tau: 0.7, k_retries: 3, max_outer_replans: 2, max_total_segments: 64 }
    }
}

impl LoopConfig {
    pub fn for_mode(mode: LoopMode) -> Self {
        let base = Self::default();
        match mode {
            LoopMode::OpenLoop => Self { k_retries: 0, max_outer_replans: 0, ..base },
            LoopMode::InnerOnly => Self { max_outer_replans: 0, ..base },
            LoopMode::Full => base,
        }
    }

    /// Zero retries and zero replans are allowed: that is the open-loop
    /// baseline.
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        if self.max_total_segments == 0 {
            return Err(Error::Config("max_total_segments must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which repair loops are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopMode {
    OpenLoop,
    InnerOnly,
    Full,
}

impl LoopMode {
    pub const ALL: [LoopMode; 3] = [LoopMode::OpenLoop, LoopMode::InnerOnly, LoopMode::Full];

    pub fn name(self) -> &'static str {
        match self {
            LoopMode::OpenLoop => "open-loop",
            LoopMode::InnerOnly => "inner-only",
            LoopMode::Full => "full",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown loop mode '{name}' (open-loop, inner-only, full)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeStatus {
    Success,
    PlanFailure,
    BudgetExhausted,
}

impl EpisodeStatus {
    pub fn name(self) -> &'static str {
        match self {
            EpisodeStatus::Success => "success",
            EpisodeStatus::PlanFailure => "plan-failure",
            EpisodeStatus::BudgetExhausted => "budget-exhausted",
        }
    }
}

/// One generation and its critique.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptRecord {
    /// 0 for the initial plan, incremented by each replan.
    pub plan_version: usize,
    pub sid: u32,
    /// 0 for the first generation of the step, then 1..=k_retries.
    pub attempt: usize,
    pub instruction: String,
    pub report: CriticReport,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanEvent {
    /// Version number of the plan this event produced.
    pub plan_version: usize,
    pub failed_sid: u32,
    pub feedback_text: String,
    pub retry_same: bool,
    /// Belief literals overwritten before replanning.
    pub corrections: Vec<Literal>,
    pub instructions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub goal: Goal,
    pub status: EpisodeStatus,
    pub initial_plan: Vec<String>,
    pub attempts: Vec<AttemptRecord>,
    pub replans: Vec<ReplanEvent>,
    pub memory: WorldMemory,
    /// Accepted steps whose post literals held at their last frame.
    pub completed_steps: usize,
    /// Unexecuted steps of the final plan, including a failed one.
    pub remaining_steps: usize,
    pub segments_generated: usize,
    /// Max absolute jump between an accepted segment's first frame and the
    /// frame it was conditioned on.
    pub boundary_deltas: Vec<f64>,
    pub wall_ms: f64,
}

impl EpisodeLog {
    /// Completed steps over completed plus outstanding steps; 1 for an
    /// empty plan.
    pub fn completeness(&self) -> f64 {
        let total = self.completed_steps + self.remaining_steps;
        if total == 0 {
            1.0
        } else {
            self.completed_steps as f64 / total as f64
        }
    }

    pub fn success(&self) -> bool {
        self.status == EpisodeStatus::Success
    }

    /// Reports of accepted segments, in memory order.
    pub fn accepted_reports(&self) -> impl Iterator<Item = &CriticReport> {
        self.attempts.iter().filter(|a| a.accepted).map(|a| &a.report)
    }

    /// Line-delimited JSON: one episode header, then one line per attempt
    /// and per replan event.
    pub fn to_jsonl(&self, spec: &DomainSpec) -> String {
        let mut lines = vec![json!({
            "type": "episode",
            "goal": self.goal.description,
            "target": self.goal.target.iter().map(|l| spec.literal_key(*l)).collect::<Vec<_>>(),
            "status": self.status.name(),
            "completeness": self.completeness(),
            "initial_plan": self.initial_plan,
            "accepted": self.memory.len(),
            "segments": self.segments_generated,
            "replans": self.replans.len(),
            "boundary_deltas": self.boundary_deltas,
            "wall_ms": self.wall_ms,
        })];
        for a in &self.attempts {
            lines.push(json!({
                "type": "attempt",
                "plan_version": a.plan_version,
                "sid": a.sid,
                "attempt": a.attempt,
                "instruction": a.instruction,
                "accepted": a.accepted,
                "scalar": a.report.scalar,
                "scores": a.report.scores.0,
                "tags": a.report.tags.iter().map(|t| t.render(spec)).collect::<Vec<_>>(),
            }));
        }
        for r in &self.replans {
            lines.push(json!({
                "type": "replan",
                "plan_version": r.plan_version,
                "failed_sid": r.failed_sid,
                "feedback": r.feedback_text,
                "retry_same": r.retry_same,
                "corrections": r.corrections.iter().map(|l| spec.literal_key(*l)).collect::<Vec<_>>(),
                "plan": r.instructions,
            }));
        }
        let mut out = String::new();
        for l in lines {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }
}

/// One generation inside a refinement.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub step: PlanStep,
    pub segment: Segment,
    pub report: CriticReport,
}

/// Outcome of [`inner_refine`].
#[derive(Debug, Clone, Default)]
pub struct Refinement {
    pub attempts: Vec<Attempt>,
    /// Index into `attempts` of the accepted generation.
    pub accepted: Option<usize>,
}

/// Regenerates a rejected step with the critic-revised instruction and fresh
/// noise, up to `budget` times. Stops at the first accepted segment.
#[allow(clippy::too_many_arguments)]
pub fn inner_refine(
    spec: &DomainSpec,
    step: &PlanStep,
    report: &CriticReport,
    policy: &dyn SegmentPolicy,
    critic: &dyn Critic,
    memory: &WorldMemory,
    budget: usize,
    rng: &mut RandomSource,
) -> Result<Refinement> {
    let tau = critic.config().tau;
    let mut out = Refinement::default();
    let mut last = report.clone();
    for _ in 0..budget {
        let revised = step.with_instruction(revise_for(spec, step, &last));
        let segment = policy.generate(spec, &revised, memory, rng)?;
        let r = critic.evaluate(spec, &segment, &revised)?;
        let ok = r.accepted(tau);
        last = r.clone();
        out.attempts.push(Attempt { step: revised, segment, report: r });
        if ok {
            out.accepted = Some(out.attempts.len() - 1);
            break;
        }
    }
    Ok(out)
}

fn revise_for(spec: &DomainSpec, step: &PlanStep, report: &CriticReport) -> String {
    if report.revised_instruction.is_empty() {
        crate::critic::revise_instruction(spec, step, report)
    } else {
        report.revised_instruction.clone()
    }
}

/// Replans from the memory's belief state after the inner loop gave up.
pub fn outer_replan(
    spec: &DomainSpec,
    goal: &Goal,
    failure: &FailureContext,
    planner: &dyn Planner,
    memory: &WorldMemory,
) -> Result<PlanSequence> {
    planner.replan(spec, goal, failure, memory.state())
}

/// Plans `goal` from the domain's initial state and executes it with the
/// think-act-reflect loop. Planner failures on the initial plan are errors;
/// everything later is recorded in the log.
pub fn run_episode(
    spec: &DomainSpec,
    goal: &Goal,
    planner: &dyn Planner,
    policy: &dyn SegmentPolicy,
    critic: &dyn Critic,
    config: &LoopConfig,
    rng: &mut RandomSource,
) -> Result<EpisodeLog> {
    run_episode_from(spec, &spec.initial, goal, planner, policy, critic, config, rng)
}

/// [`run_episode`] from an arbitrary starting state.
#[allow(clippy::too_many_arguments)]
pub fn run_episode_from(
    spec: &DomainSpec,
    initial: &SymbolicState,
    goal: &Goal,
    planner: &dyn Planner,
    policy: &dyn SegmentPolicy,
    critic: &dyn Critic,
    config: &LoopConfig,
    rng: &mut RandomSource,
) -> Result<EpisodeLog> {
    config.validate()?;
    let start = Instant::now();
    let tau = config.tau;
    let mut current = planner.plan(spec, goal, initial)?;
    let mut log = EpisodeLog {
        goal: goal.clone(),
        status: EpisodeStatus::Success,
        initial_plan: current.steps.iter().map(|s| s.instruction.clone()).collect(),
        attempts: Vec::new(),
        replans: Vec::new(),
        memory: WorldMemory::new(spec, initial.clone()),
        completed_steps: 0,
        remaining_steps: 0,
        segments_generated: 0,
        boundary_deltas: Vec::new(),
        wall_ms: 0.0,
    };
    let mut version = 0;
    let mut idx = 0;
    loop {
        if idx == current.len() {
            if !goal.satisfied_by(log.memory.state()) {
                log.status = EpisodeStatus::PlanFailure;
            }
            break;
        }
        if log.segments_generated >= config.max_total_segments {
            log.status = EpisodeStatus::BudgetExhausted;
            break;
        }
        let step = current.steps[idx].clone();
        let segment = policy.generate(spec, &step, &log.memory, rng)?;
        log.segments_generated += 1;
        let report = critic.evaluate(spec, &segment, &step)?;
        let mut tried = vec![Attempt { step: step.clone(), segment, report: report.clone() }];
        let mut accepted = report.accepted(tau).then_some(0);
        if accepted.is_none() {
            let budget = config.k_retries.min(config.max_total_segments - log.segments_generated);
            let refinement = inner_refine(spec, &step, &report, policy, critic, &log.memory, budget, rng)?;
            log.segments_generated += refinement.attempts.len();
            accepted = refinement.accepted.map(|i| i + 1);
            tried.extend(refinement.attempts);
        }
        for (i, a) in tried.iter().enumerate() {
            log.attempts.push(AttemptRecord {
                plan_version: version,
                sid: step.sid,
                attempt: i,
                instruction: a.step.instruction.clone(),
                report: a.report.clone(),
                accepted: accepted == Some(i),
            });
        }
        if let Some(i) = accepted {
            let a = tried.swap_remove(i);
            let delta = a
                .segment
                .first_frame()
                .iter()
                .zip(log.memory.last_frame())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            log.boundary_deltas.push(delta);
            if a.report.post_satisfied {
                log.completed_steps += 1;
            }
            memory_update(&mut log.memory, spec, &a.step, a.segment, &a.report, tau)?;
            idx += 1;
            continue;
        }
        if tried.len() < config.k_retries + 1 {
            log.status = EpisodeStatus::BudgetExhausted;
            break;
        }
        if log.replans.len() >= config.max_outer_replans {
            log.status = EpisodeStatus::PlanFailure;
            break;
        }
        let seed = seed_report(&tried, tau);
        let corrections = correct_beliefs(spec, &mut log.memory, &seed.tags);
        let failure = FailureContext {
            executed: log.memory.transitions().iter().map(|t| t.step.sid).collect(),
            failed: step.clone(),
            feedback_tags: seed.tags.clone(),
            feedback_text: seed.tags.iter().map(|t| t.render(spec)).collect::<Vec<_>>().join("; "),
            remaining: PlanSequence { steps: current.steps[idx..].to_vec() },
        };
        match outer_replan(spec, goal, &failure, planner, &log.memory) {
            Ok(next) => {
                version += 1;
                log.replans.push(ReplanEvent {
                    plan_version: version,
                    failed_sid: step.sid,
                    feedback_text: failure.feedback_text,
                    retry_same: failure.feedback_tags.contains(&FeedbackTag::RetrySame),
                    corrections,
                    instructions: next.steps.iter().map(|s| s.instruction.clone()).collect(),
                });
                current = next;
                idx = 0;
            }
            Err(Error::NoPlan(_)) => {
                log.status = EpisodeStatus::PlanFailure;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    log.remaining_steps = current.len() - idx;
    log.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(log)
}

/// The best rejected report if it clears half the threshold, else the last.
fn seed_report(tried: &[Attempt], tau: f64) -> &CriticReport {
    let best = tried.iter().map(|a| &a.report).max_by(|a, b| a.scalar.total_cmp(&b.scalar)).expect("at least one attempt");
    if best.scalar >= 0.5 * tau {
        best
    } else {
        &tried.last().expect("at least one attempt").report
    }
}

/// Applies missing-precondition feedback to the belief state, but only for
/// literals the last committed frame also contradicts, so a single noisy
/// generation cannot rewrite what memory has observed.
fn correct_beliefs(spec: &DomainSpec, memory: &mut WorldMemory, tags: &[FeedbackTag]) -> Vec<Literal> {
    let observed = decode_frame(spec, memory.last_frame(), DECODE_THRESHOLD);
    let mut out = Vec::new();
    for tag in tags {
        if let FeedbackTag::PreconditionMissing(lit) = tag {
            if memory.state().holds(*lit) && !observed.holds(*lit) {
                memory.correct_belief(lit.negate());
                out.push(lit.negate());
            }
        }
    }
    out
}
