use crate::critic::FeedbackTag;
use crate::microworld::{apply_operator, DomainSpec, Literal, OperatorId, SymbolicState};
use crate::{Error, Result};

pub const MAX_INSTRUCTION_WORDS: usize = 36;

/// Target literals that must hold in the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub description: String,
    pub target: Vec<Literal>,
}

impl Goal {
    pub fn new(spec: &DomainSpec, target: Vec<Literal>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::InvalidArgument("goal needs at least one literal".into()));
        }
        if let Some(l) = target.iter().find(|l| l.predicate >= spec.predicates.len()) {
            return Err(Error::DanglingReference(format!("goal predicate #{}", l.predicate)));
        }
        let description = target.iter().map(|l| spec.literal_phrase(*l)).collect::<Vec<_>>().join(" and ");
        Ok(Self { description, target })
    }

    /// Parses comma-separated literals such as `cup.full, !kettle.held`.
    pub fn parse(spec: &DomainSpec, text: &str) -> Result<Self> {
        let target = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| spec.parse_literal(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, target)
    }

    pub fn satisfied_by(&self, state: &SymbolicState) -> bool {
        state.holds_all(&self.target)
    }
}

/// `{verb, objects, tool}` action triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpec {
    pub verb: String,
    pub objects: Vec<String>,
    pub tool: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub sid: u32,
    pub operator: OperatorId,
    pub instruction: String,
    pub actions: Vec<ActionSpec>,
    pub pre: Vec<Literal>,
    pub post: Vec<Literal>,
}

impl PlanStep {
    pub fn from_operator(spec: &DomainSpec, sid: u32, op: OperatorId) -> Self {
        let o = spec.operator(op);
        let name = |e: usize| spec.entities[e].name.clone();
        PlanStep {
            sid,
            operator: op,
            instruction: instruction_for(spec, op),
            actions: vec![ActionSpec {
                verb: o.verb.clone(),
                objects: o.objects.iter().map(|&e| name(e)).collect(),
                tool: o.tool.map(name),
            }],
            pre: o.pre.clone(),
            post: o.post.clone(),
        }
    }

    /// Same step with a different instruction text.
    pub fn with_instruction(&self, instruction: String) -> Self {
        PlanStep { instruction, ..self.clone() }
    }
}

/// Templated instruction: "pour the kettle into the cup".
pub fn instruction_for(spec: &DomainSpec, op: OperatorId) -> String {
    let o = spec.operator(op);
    let mut text = format!("{} the {}", o.verb, spec.entities[o.objects[0]].name);
    let prep = match o.verb.as_str() {
        "pour" | "hammer" => "into",
        "place" => "on",
        _ => "and",
    };
    for &e in &o.objects[1..] {
        text.push_str(&format!(" {prep} the {}", spec.entities[e].name));
    }
    if let Some(t) = o.tool {
        text.push_str(&format!(" with the {}", spec.entities[t].name));
    }
    text
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanSequence {
    pub steps: Vec<PlanStep>,
}

impl PlanSequence {
    pub fn from_operators(spec: &DomainSpec, first_sid: u32, ops: &[OperatorId]) -> Self {
        PlanSequence {
            steps: ops
                .iter()
                .enumerate()
                .map(|(i, &op)| PlanStep::from_operator(spec, first_sid + i as u32, op))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn operators(&self) -> Vec<OperatorId> {
        self.steps.iter().map(|s| s.operator).collect()
    }

    /// Simulated states before and after every step (the plan trace);
    /// stops at the first precondition violation.
    pub fn trace(&self, spec: &DomainSpec, initial: &SymbolicState) -> Result<Vec<SymbolicState>> {
        let mut states = vec![initial.clone()];
        for step in &self.steps {
            let next = apply_operator(spec, states.last().unwrap(), step.operator)?;
            states.push(next);
        }
        Ok(states)
    }

    /// Renumbers sids consecutively from `first`.
    pub fn renumbered(mut self, first: u32) -> Self {
        for (i, s) in self.steps.iter_mut().enumerate() {
            s.sid = first + i as u32;
        }
        self
    }
}

/// Everything the planner needs to recover from a failed step.
#[derive(Debug, Clone)]
pub struct FailureContext {
    /// Sids of accepted steps, in order.
    pub executed: Vec<u32>,
    pub failed: PlanStep,
    pub feedback_tags: Vec<FeedbackTag>,
    pub feedback_text: String,
    /// Unexecuted suffix of the current plan, starting with the failed step.
    pub remaining: PlanSequence,
}

impl FailureContext {
    pub fn retry_same(&self) -> bool {
        self.feedback_tags.iter().any(|t| matches!(t, FeedbackTag::RetrySame))
    }
}

/// Outcome of simulating a plan.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationReport {
    Ok,
    PreconditionViolated { sid: u32, literal: Literal },
    GoalUnmet { missing: Vec<Literal> },
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationReport::Ok)
    }

    pub fn describe(&self, spec: &DomainSpec) -> String {
        match self {
            ValidationReport::Ok => "ok".into(),
            ValidationReport::PreconditionViolated { sid, literal } => {
                format!("step {sid} requires '{}' which does not hold", spec.literal_phrase(*literal))
            }
            ValidationReport::GoalUnmet { missing } => {
                format!("goal literals unmet: {}", spec.display_literals(missing))
            }
        }
    }
}
