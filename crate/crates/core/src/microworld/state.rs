use super::{DomainSpec, Literal, MoveTarget, OperatorId};
use crate::{Error, Result};

/// Predicate channels at or above this value decode as true.
pub const DECODE_THRESHOLD: f64 = 0.5;

/// Complete assignment of every predicate and pose in a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicState {
    pub predicates: Vec<bool>,
    pub poses: Vec<f64>,
}

impl SymbolicState {
    pub fn holds(&self, lit: Literal) -> bool {
        self.predicates[lit.predicate] == lit.value
    }

    pub fn holds_all(&self, lits: &[Literal]) -> bool {
        lits.iter().all(|l| self.holds(*l))
    }

    /// First literal of `lits` that does not hold.
    pub fn first_violation(&self, lits: &[Literal]) -> Option<Literal> {
        lits.iter().copied().find(|l| !self.holds(*l))
    }

    pub fn set(&mut self, lit: Literal) {
        self.predicates[lit.predicate] = lit.value;
    }

    /// Predicate assignment packed into a bitmask (domains with at most 64 predicates).
    pub fn predicate_key(&self) -> u64 {
        self.predicates
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| if b { acc | (1 << i) } else { acc })
    }
}

pub fn encode_state(spec: &DomainSpec, state: &SymbolicState) -> Vec<f64> {
    let mut frame = vec![0.0; spec.width()];
    for (p, &v) in state.predicates.iter().enumerate() {
        frame[spec.predicate_channel(p)] = if v { 1.0 } else { 0.0 };
    }
    for (slot, &x) in state.poses.iter().enumerate() {
        frame[spec.pose_channel(slot)] = x;
    }
    frame
}

/// Thresholds predicate channels (ties decode as true) and clips poses to [0, 1].
pub fn decode_frame(spec: &DomainSpec, frame: &[f64], threshold: f64) -> SymbolicState {
    assert_eq!(frame.len(), spec.width(), "frame width");
    let predicates = (0..spec.predicates.len())
        .map(|p| frame[spec.predicate_channel(p)] >= threshold)
        .collect();
    let poses = (0..spec.n_poses())
        .map(|slot| frame[spec.pose_channel(slot)].clamp(0.0, 1.0))
        .collect();
    SymbolicState { predicates, poses }
}

/// Applies an operator's post literals and terminal poses to a copy of `state`.
pub fn apply_operator(spec: &DomainSpec, state: &SymbolicState, op: OperatorId) -> Result<SymbolicState> {
    let operator = spec
        .operators
        .get(op.0)
        .ok_or_else(|| Error::UnknownOperator(format!("#{}", op.0)))?;
    if let Some(lit) = state.first_violation(&operator.pre) {
        return Err(Error::PreconditionViolation {
            operator: operator.name.clone(),
            literal: spec.literal_phrase(lit),
        });
    }
    let mut next = state.clone();
    for lit in &operator.post {
        next.set(*lit);
    }
    for m in &operator.motion.moves {
        let slot = spec.entities[m.entity].pose_slot.expect("validated at load");
        next.poses[slot] = match m.to {
            MoveTarget::Value(v) => v,
            MoveTarget::Entity(e) => state.poses[spec.entities[e].pose_slot.expect("validated at load")],
        };
    }
    Ok(next)
}

/// Every (state, operator) pair where the operator applies, over all
/// predicate assignments reachable from the domain's initial state.
pub fn reachable_applications(spec: &DomainSpec) -> Vec<(SymbolicState, OperatorId)> {
    let mut out = Vec::new();
    let mut frontier = std::collections::VecDeque::from([spec.initial.clone()]);
    let mut seen = std::collections::HashSet::from([spec.initial.predicate_key()]);
    while let Some(s) = frontier.pop_front() {
        for i in 0..spec.operators.len() {
            if let Ok(n) = apply_operator(spec, &s, OperatorId(i)) {
                out.push((s.clone(), OperatorId(i)));
                if seen.insert(n.predicate_key()) {
                    frontier.push_back(n);
                }
            }
        }
    }
    out
}
