use crate::critic::CriticReport;
use crate::microworld::{apply_operator, encode_state, DomainSpec, Literal, Segment, SymbolicState};
use crate::planner::PlanStep;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub step: PlanStep,
    pub segment: Segment,
    /// Critic scalar the segment was accepted with.
    pub reward: f64,
}

/// Append-only record of accepted transitions and the belief state they
/// imply.
///
/// The belief state is the chain application of the accepted operators to
/// the initial state, with any literal corrections applied after the
/// transition they were observed at.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMemory {
    initial_frame: Vec<f64>,
    transitions: Vec<Transition>,
    state: SymbolicState,
    corrections: Vec<(usize, Literal)>,
}

impl WorldMemory {
    pub fn new(spec: &DomainSpec, initial: SymbolicState) -> Self {
        Self { initial_frame: encode_state(spec, &initial), transitions: Vec::new(), state: initial, corrections: Vec::new() }
    }

    /// Final frame of the last accepted segment, else the encoded initial state.
    pub fn last_frame(&self) -> &[f64] {
        self.transitions.last().map_or(&self.initial_frame, |t| t.segment.last_frame())
    }

    pub fn state(&self) -> &SymbolicState {
        &self.state
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// `(number of accepted transitions at the time, literal)` pairs.
    pub fn corrections(&self) -> &[(usize, Literal)] {
        &self.corrections
    }

    /// Appends a transition without an acceptance check. Training rollouts
    /// advance with their best member whatever its reward; the inference
    /// loop goes through [`memory_update`].
    pub fn advance(&mut self, spec: &DomainSpec, step: &PlanStep, segment: Segment, reward: f64) -> Result<()> {
        if segment.width() != spec.width() {
            return Err(Error::Shape(format!("segment width {} but domain width {}", segment.width(), spec.width())));
        }
        self.state = apply_operator(spec, &self.state, step.operator)?;
        self.transitions.push(Transition { step: step.clone(), segment, reward });
        Ok(())
    }

    /// Overrides one literal of the belief state, e.g. after the critic
    /// reports that a precondition the planner assumed does not hold.
    pub fn correct_belief(&mut self, literal: Literal) {
        self.state.set(literal);
        self.corrections.push((self.transitions.len(), literal));
    }
}

/// Appends an accepted transition. Rejects reports below `tau`.
pub fn memory_update(
    memory: &mut WorldMemory,
    spec: &DomainSpec,
    step: &PlanStep,
    segment: Segment,
    report: &CriticReport,
    tau: f64,
) -> Result<()> {
    if report.scalar < tau {
        return Err(Error::InvalidArgument(format!(
            "segment for step {} has reward {:.4} below the acceptance threshold {tau}",
            step.sid, report.scalar
        )));
    }
    memory.advance(spec, step, segment, report.scalar)
}
