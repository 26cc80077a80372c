use crate::episode::WorldMemory;
use crate::microworld::{Channel, DomainSpec, Literal};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Plan lengths beyond this share the last step-index value.
pub const MAX_STEP_INDEX: usize = 10;

/// Conditioning vector for one plan step:
/// `[last frame (d) | operator one-hot (n_ops) | object channel mask (d) |
///   emphasis mask (d) | step index / 10]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEncoding {
    pub values: Vec<f64>,
}

impl ContextEncoding {
    pub fn width_for(spec: &DomainSpec) -> usize {
        3 * spec.width() + spec.operators.len() + 1
    }

    /// The last-frame slice.
    pub fn frame<'a>(&'a self, spec: &DomainSpec) -> &'a [f64] {
        &self.values[..spec.width()]
    }

    /// Replaces the emphasis mask.
    pub fn with_emphasis(mut self, spec: &DomainSpec, literals: &[Literal]) -> Self {
        let d = spec.width();
        let start = 2 * d + spec.operators.len();
        self.values[start..start + d].iter_mut().for_each(|v| *v = 0.0);
        for l in literals {
            self.values[start + spec.predicate_channel(l.predicate)] = 1.0;
        }
        self
    }
}

/// Literals named in single quotes in an instruction, as revised
/// instructions do ("Ensure post-condition 'lid removed' is reached...").
pub fn quoted_literals(spec: &DomainSpec, instruction: &str) -> Vec<Literal> {
    instruction
        .split('\'')
        .skip(1)
        .step_by(2)
        .filter_map(|q| spec.parse_literal(q).ok())
        .collect()
}

/// Builds the encoding from explicit parts.
pub fn encode_condition(
    spec: &DomainSpec,
    step: &PlanStep,
    last_frame: &[f64],
    step_index: usize,
) -> Result<ContextEncoding> {
    let d = spec.width();
    if last_frame.len() != d {
        return Err(Error::Shape(format!("frame width {} but domain width {d}", last_frame.len())));
    }
    let n_ops = spec.operators.len();
    let op = spec
        .operators
        .get(step.operator.0)
        .ok_or_else(|| Error::UnknownOperator(format!("#{}", step.operator.0)))?;
    let mut values = Vec::with_capacity(ContextEncoding::width_for(spec));
    values.extend_from_slice(last_frame);
    values.extend((0..n_ops).map(|i| if i == step.operator.0 { 1.0 } else { 0.0 }));
    let involved = |e: usize| e == spec.actor || op.objects.contains(&e) || op.tool == Some(e);
    values.extend(spec.channels.iter().map(|c| {
        let entity = match *c {
            Channel::Predicate(p) => spec.predicates[p].entity,
            Channel::Pose(slot) => spec.entities.iter().position(|e| e.pose_slot == Some(slot)).unwrap_or(usize::MAX),
        };
        if involved(entity) {
            1.0
        } else {
            0.0
        }
    }));
    values.extend(std::iter::repeat_n(0.0, d));
    values.push(step_index.min(MAX_STEP_INDEX) as f64 / MAX_STEP_INDEX as f64);
    let enc = ContextEncoding { values };
    Ok(enc.with_emphasis(spec, &quoted_literals(spec, &step.instruction)))
}

/// Encoding of `step` given the accepted history in `memory`.
pub fn embed_condition(spec: &DomainSpec, step: &PlanStep, memory: &WorldMemory) -> Result<ContextEncoding> {
    encode_condition(spec, step, memory.last_frame(), memory.len())
}
