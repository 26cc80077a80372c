use std::collections::{HashSet, VecDeque};

use super::types::{FailureContext, Goal, PlanSequence, ValidationReport};
use crate::microworld::{apply_operator, DomainSpec, OperatorId, SymbolicState};
use crate::{Error, Result};

/// Default cap on expanded search nodes.
pub const DEFAULT_NODE_BUDGET: usize = 100_000;

/// Produces and repairs plans. Implemented by the built-in search and by
/// remote agent backends.
pub trait Planner: Sync {
    fn plan(&self, spec: &DomainSpec, goal: &Goal, initial: &SymbolicState) -> Result<PlanSequence>;

    fn replan(
        &self,
        spec: &DomainSpec,
        goal: &Goal,
        failure: &FailureContext,
        state: &SymbolicState,
    ) -> Result<PlanSequence>;
}

/// Breadth-first planner over grounded operators.
#[derive(Debug, Clone, Copy)]
pub struct BfsPlanner {
    pub node_budget: usize,
}

impl Default for BfsPlanner {
    fn default() -> Self {
        Self { node_budget: DEFAULT_NODE_BUDGET }
    }
}

impl Planner for BfsPlanner {
    fn plan(&self, spec: &DomainSpec, goal: &Goal, initial: &SymbolicState) -> Result<PlanSequence> {
        plan_with_budget(spec, goal, initial, self.node_budget)
    }

    fn replan(
        &self,
        spec: &DomainSpec,
        goal: &Goal,
        failure: &FailureContext,
        state: &SymbolicState,
    ) -> Result<PlanSequence> {
        replan_with_budget(spec, goal, failure, state, self.node_budget)
    }
}

/// Operators in tie-breaking order: lexicographic on (verb, object names),
/// then tool and operator name.
fn ordered_operators(spec: &DomainSpec) -> Vec<OperatorId> {
    let mut ids: Vec<OperatorId> = (0..spec.operators.len()).map(OperatorId).collect();
    ids.sort_by_key(|&id| {
        let o = spec.operator(id);
        let objects: Vec<&str> = o.objects.iter().map(|&e| spec.entities[e].name.as_str()).collect();
        let tool = o.tool.map(|t| spec.entities[t].name.as_str());
        (o.verb.as_str(), objects, tool, o.name.as_str())
    });
    ids
}

/// Shortest operator sequence from `start` to a state satisfying `goal`.
/// Among equally short plans the lexicographically first (in operator
/// order) wins. `forbidden_first` excludes one operator as the first action.
fn search(
    spec: &DomainSpec,
    start: &SymbolicState,
    goal: &Goal,
    budget: usize,
    forbidden_first: Option<OperatorId>,
) -> Result<Vec<OperatorId>> {
    if spec.predicates.len() > 64 {
        return Err(Error::InvalidArgument("planner supports at most 64 predicates".into()));
    }
    if goal.satisfied_by(start) {
        return Ok(Vec::new());
    }
    let ops = ordered_operators(spec);
    // node: (state, parent, operator)
    let mut nodes: Vec<(SymbolicState, usize, OperatorId)> = vec![(start.clone(), usize::MAX, OperatorId(usize::MAX))];
    // With a forbidden first action the start state stays unvisited: a detour
    // that returns to it may then use the forbidden operator.
    let mut visited = HashSet::new();
    if forbidden_first.is_none() {
        visited.insert(start.predicate_key());
    }
    let mut queue = VecDeque::from([0usize]);
    let mut expanded = 0;
    while let Some(idx) = queue.pop_front() {
        expanded += 1;
        if expanded > budget {
            return Err(Error::NoPlan(format!("search budget of {budget} nodes exhausted")));
        }
        for &op in &ops {
            if idx == 0 && Some(op) == forbidden_first {
                continue;
            }
            let Ok(next) = apply_operator(spec, &nodes[idx].0, op) else { continue };
            if !visited.insert(next.predicate_key()) {
                continue;
            }
            let done = goal.satisfied_by(&next);
            nodes.push((next, idx, op));
            let child = nodes.len() - 1;
            if done {
                let mut path = Vec::new();
                let mut cur = child;
                while cur != 0 {
                    path.push(nodes[cur].2);
                    cur = nodes[cur].1;
                }
                path.reverse();
                return Ok(path);
            }
            queue.push_back(child);
        }
    }
    Err(Error::NoPlan(format!("goal '{}' is unreachable", goal.description)))
}

/// Plans with the default node budget.
pub fn plan(spec: &DomainSpec, goal: &Goal, initial: &SymbolicState) -> Result<PlanSequence> {
    plan_with_budget(spec, goal, initial, DEFAULT_NODE_BUDGET)
}

pub fn plan_with_budget(
    spec: &DomainSpec,
    goal: &Goal,
    initial: &SymbolicState,
    budget: usize,
) -> Result<PlanSequence> {
    let ops = search(spec, initial, goal, budget, None)?;
    Ok(PlanSequence::from_operators(spec, 1, &ops))
}

/// Recovery plan starting at the failed step's sid.
///
/// With a `retry-same` tag the remaining draft is kept when it is still
/// valid, and the failed operator may be reused. Otherwise the failed
/// operator is excluded as the first action.
pub fn replan(
    spec: &DomainSpec,
    goal: &Goal,
    failure: &FailureContext,
    state: &SymbolicState,
) -> Result<PlanSequence> {
    replan_with_budget(spec, goal, failure, state, DEFAULT_NODE_BUDGET)
}

fn replan_with_budget(
    spec: &DomainSpec,
    goal: &Goal,
    failure: &FailureContext,
    state: &SymbolicState,
    budget: usize,
) -> Result<PlanSequence> {
    let sid = failure.failed.sid;
    if failure.retry_same() {
        if validate_plan(spec, &failure.remaining, state, Some(goal)).is_ok() {
            return Ok(failure.remaining.clone().renumbered(sid));
        }
        let ops = search(spec, state, goal, budget, None)?;
        return Ok(PlanSequence::from_operators(spec, sid, &ops));
    }
    let ops = search(spec, state, goal, budget, Some(failure.failed.operator))
        .map_err(|e| Error::NoPlan(format!("no recovery plan avoiding '{}': {e}", failure.failed.instruction)))?;
    Ok(PlanSequence::from_operators(spec, sid, &ops))
}

/// Simulates `plan` from `initial`; reports the first violated precondition
/// or, when a goal is given, the goal literals left unmet.
pub fn validate_plan(
    spec: &DomainSpec,
    plan: &PlanSequence,
    initial: &SymbolicState,
    goal: Option<&Goal>,
) -> ValidationReport {
    let mut state = initial.clone();
    for step in &plan.steps {
        let op = spec.operator(step.operator);
        if let Some(literal) = state.first_violation(&op.pre) {
            return ValidationReport::PreconditionViolated { sid: step.sid, literal };
        }
        state = apply_operator(spec, &state, step.operator).expect("preconditions checked");
    }
    if let Some(goal) = goal {
        let missing: Vec<_> = goal.target.iter().copied().filter(|l| !state.holds(*l)).collect();
        if !missing.is_empty() {
            return ValidationReport::GoalUnmet { missing };
        }
    }
    ValidationReport::Ok
}
