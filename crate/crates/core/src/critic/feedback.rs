use super::evaluate::CriticReport;
use crate::microworld::{DomainSpec, Literal};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Machine-readable failure cause attached to a rejected segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackTag {
    /// A pre literal did not hold at the first frame.
    PreconditionMissing(Literal),
    /// A post literal did not hold at the last frame.
    PostConditionUnmet(Literal),
    NoProgress,
    WeakInteraction,
    TemporalIncoherence,
    PhysicsViolation,
    /// The plan itself is fine; regenerate the same step.
    RetrySame,
}

impl FeedbackTag {
    /// Wire form, e.g. `post-condition-unmet: lid removed`.
    pub fn render(&self, spec: &DomainSpec) -> String {
        match self {
            FeedbackTag::PreconditionMissing(l) => format!("precondition-missing: {}", spec.literal_phrase(*l)),
            FeedbackTag::PostConditionUnmet(l) => format!("post-condition-unmet: {}", spec.literal_phrase(*l)),
            FeedbackTag::NoProgress => "no-progress".into(),
            FeedbackTag::WeakInteraction => "weak-interaction".into(),
            FeedbackTag::TemporalIncoherence => "temporal-incoherence".into(),
            FeedbackTag::PhysicsViolation => "physics-violation".into(),
            FeedbackTag::RetrySame => "retry-same".into(),
        }
    }

    /// Parses the wire form. The text after a literal tag's colon must
    /// start with a literal phrase or key; anything after it is commentary
    /// (`precondition-missing: jar closed but lid already removed`).
    pub fn parse(spec: &DomainSpec, text: &str) -> Result<Self> {
        let text = text.trim();
        let (head, rest) = match text.split_once(':') {
            Some((h, r)) => (h.trim(), Some(r.trim())),
            None => (text, None),
        };
        let literal = || -> Result<Literal> {
            let rest = rest.ok_or_else(|| Error::Schema(format!("tag '{head}' needs a literal")))?;
            longest_literal_prefix(spec, rest)
                .ok_or_else(|| Error::Schema(format!("tag '{text}' names no known predicate")))
        };
        Ok(match head {
            "precondition-missing" => FeedbackTag::PreconditionMissing(literal()?),
            "post-condition-unmet" => FeedbackTag::PostConditionUnmet(literal()?),
            "no-progress" => FeedbackTag::NoProgress,
            "weak-interaction" => FeedbackTag::WeakInteraction,
            "temporal-incoherence" => FeedbackTag::TemporalIncoherence,
            "physics-violation" => FeedbackTag::PhysicsViolation,
            "retry-same" => FeedbackTag::RetrySame,
            other => return Err(Error::Schema(format!("unknown feedback tag '{other}'"))),
        })
    }

    fn hint(&self, spec: &DomainSpec, step: &PlanStep) -> String {
        let target = spec.operator(step.operator).motion.target.map(|t| spec.entities[t].name.as_str());
        match self {
            FeedbackTag::PostConditionUnmet(l) => {
                format!("Ensure post-condition '{}' is reached before the segment ends", spec.literal_phrase(*l))
            }
            FeedbackTag::PreconditionMissing(l) => format!("Start only once '{}' holds", spec.literal_phrase(*l)),
            FeedbackTag::NoProgress => "Move steadily toward the post-conditions".into(),
            FeedbackTag::WeakInteraction => match target {
                Some(t) => format!("Keep the {} close to the {t} during contact", spec.entities[spec.actor].name),
                None => "Keep contact during the action".into(),
            },
            FeedbackTag::TemporalIncoherence => "Keep the motion smooth".into(),
            FeedbackTag::PhysicsViolation => "Avoid sudden jumps".into(),
            FeedbackTag::RetrySame => String::new(),
        }
    }
}

fn longest_literal_prefix(spec: &DomainSpec, text: &str) -> Option<Literal> {
    let (value, body) = match text.strip_prefix("not ").or_else(|| text.strip_prefix('!')) {
        Some(rest) => (false, rest.trim_start()),
        None => (true, text),
    };
    spec.predicates
        .iter()
        .enumerate()
        .flat_map(|(i, p)| [(i, p.phrase.as_str()), (i, p.key.as_str())])
        .filter(|(_, name)| {
            body.strip_prefix(name).is_some_and(|r| r.is_empty() || r.starts_with(|c: char| !c.is_alphanumeric() && c != '_'))
        })
        .max_by_key(|(_, name)| name.len())
        .map(|(predicate, _)| Literal { predicate, value })
}

/// How many tags a revision names.
const MAX_HINTS: usize = 2;

/// Templated rewrite of the step's instruction naming the most severe
/// causes first. Any earlier revision suffix is dropped, so revising twice
/// with the same report gives the same text.
pub fn revise_instruction(spec: &DomainSpec, step: &PlanStep, report: &CriticReport) -> String {
    let base = step.instruction.split(". ").next().unwrap_or_default().trim_end_matches('.');
    let hints: Vec<String> = report
        .tags
        .iter()
        .filter(|t| **t != FeedbackTag::RetrySame)
        .take(MAX_HINTS)
        .map(|t| t.hint(spec, step))
        .collect();
    if hints.is_empty() {
        return step.instruction.clone();
    }
    format!("{base}. {}.", hints.join(". "))
}
