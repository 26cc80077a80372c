use std::sync::Arc;

use super::client::{RemoteConfig, WireClient};
use super::wire::{
    parse_wire, plan_from_wire, report_from_wire, segment_summary, state_summary, step_to_wire, CriticRequest, CriticWire,
    PlanRequest, PlanWire, ReplanRequest,
};
use crate::critic::{Critic, CriticConfig, CriticReport, ProgrammaticCritic};
use crate::microworld::{DomainSpec, Segment, SymbolicState};
use crate::planner::{validate_plan, BfsPlanner, FailureContext, Goal, PlanSequence, PlanStep, Planner};
use crate::{Error, Result};

/// Planner speaking the `/plan` and `/replan` schemas. Every returned plan
/// is checked symbolically; a failing plan is re-requested once with the
/// violation attached, then rejected.
#[derive(Debug, Clone)]
pub struct RemotePlanner {
    pub client: Arc<WireClient>,
}

impl RemotePlanner {
    fn fetch(
        &self,
        spec: &DomainSpec,
        goal: &Goal,
        state: &SymbolicState,
        first_sid: Option<u32>,
        request: impl Fn(Option<String>) -> (String, serde_json::Value),
    ) -> Result<PlanSequence> {
        let mut violation = None;
        for round in 0..2 {
            let (endpoint, body) = request(violation.clone());
            let text = self.client.post(&endpoint, &body)?;
            let plan = plan_from_wire(spec, &parse_wire::<PlanWire>("plan", &text)?)?;
            let problem = match (first_sid, plan.steps.first()) {
                (Some(sid), Some(s)) if s.sid != sid => Some(format!("plan must start at sid {sid}, got {}", s.sid)),
                _ => {
                    let report = validate_plan(spec, &plan, state, Some(goal));
                    (!report.is_ok()).then(|| report.describe(spec))
                }
            };
            match problem {
                None => return Ok(plan),
                Some(p) if round == 0 => {
                    log::warn!("remote plan rejected, asking again: {p}");
                    violation = Some(p);
                }
                Some(p) => return Err(Error::PlanValidation(p)),
            }
        }
        unreachable!("two rounds at most")
    }
}

impl Planner for RemotePlanner {
    fn plan(&self, spec: &DomainSpec, goal: &Goal, initial: &SymbolicState) -> Result<PlanSequence> {
        if goal.satisfied_by(initial) {
            return Ok(PlanSequence::default());
        }
        self.fetch(spec, goal, initial, None, |violation| {
            let body = PlanRequest {
                goal: goal.description.clone(),
                image: state_summary(spec, initial),
                history: Vec::new(),
                violation,
            };
            ("/plan".into(), serde_json::to_value(body).expect("request serializes"))
        })
    }

    fn replan(&self, spec: &DomainSpec, goal: &Goal, failure: &FailureContext, state: &SymbolicState) -> Result<PlanSequence> {
        self.fetch(spec, goal, state, Some(failure.failed.sid), |violation| {
            let body = ReplanRequest {
                global_goal: goal.description.clone(),
                failed_attempt: step_to_wire(spec, &failure.failed),
                critic_feedback: failure.feedback_text.clone(),
                remaining_steps: failure.remaining.steps.iter().skip(1).map(|s| step_to_wire(spec, s)).collect(),
                image: state_summary(spec, state),
                violation,
            };
            ("/replan".into(), serde_json::to_value(body).expect("request serializes"))
        })
    }
}

/// Critic speaking the `/critic` schema; the scalar is recomputed locally.
#[derive(Debug, Clone)]
pub struct RemoteCritic {
    pub client: Arc<WireClient>,
    pub config: CriticConfig,
}

impl Critic for RemoteCritic {
    fn evaluate(&self, spec: &DomainSpec, segment: &Segment, step: &PlanStep) -> Result<CriticReport> {
        let body = CriticRequest {
            global_goal: step.instruction.clone(),
            action_plan_list: vec![step_to_wire(spec, step)],
            video: segment_summary(spec, segment),
        };
        let text = self.client.post("/critic", &body)?;
        report_from_wire(spec, segment, step, &parse_wire::<CriticWire>("critic", &text)?, &self.config)
    }

    fn config(&self) -> &CriticConfig {
        &self.config
    }
}

/// Where plans and critiques come from.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentBackend {
    Builtin,
    Remote(RemoteConfig),
}

impl AgentBackend {
    pub fn planner(&self) -> Result<Box<dyn Planner>> {
        Ok(match self {
            AgentBackend::Builtin => Box::new(BfsPlanner::default()),
            AgentBackend::Remote(c) => Box::new(RemotePlanner { client: Arc::new(WireClient::new(c.clone())?) }),
        })
    }

    pub fn critic(&self, config: CriticConfig) -> Result<Box<dyn Critic>> {
        config.validate()?;
        Ok(match self {
            AgentBackend::Builtin => Box::new(ProgrammaticCritic { config }),
            AgentBackend::Remote(c) => Box::new(RemoteCritic { client: Arc::new(WireClient::new(c.clone())?), config }),
        })
    }
}
