use serde::{Deserialize, Serialize};

use crate::critic::{
    aggregate, interaction_applicable, revise_instruction, CriticConfig, CriticReport, Dimension, DimensionScores,
    FeedbackTag, DIMENSIONS,
};
use crate::microworld::{decode_frame, DomainSpec, Literal, OperatorId, Segment, SymbolicState, DECODE_THRESHOLD};
use crate::planner::{ActionSpec, PlanSequence, PlanStep};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionWire {
    pub verb: String,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
}

/// One plan step. `"action instruction"` is accepted as an alias of `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepWire {
    pub sid: u32,
    #[serde(alias = "action instruction")]
    pub text: String,
    pub actions: Vec<ActionWire>,
    #[serde(default)]
    pub pre: Vec<String>,
    #[serde(default)]
    pub post: Vec<String>,
}

/// Planner response: a single `steps` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanWire {
    pub steps: Vec<StepWire>,
}

/// Body of `POST /plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    #[serde(rename = "GOAL")]
    pub goal: String,
    /// Symbolic summary of the current state (there are no pixels).
    pub image: String,
    pub history: Vec<String>,
    /// Set on the single re-request after a response failed validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
}

/// Body of `POST /replan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRequest {
    pub global_goal: String,
    pub failed_attempt: StepWire,
    pub critic_feedback: String,
    pub remaining_steps: Vec<StepWire>,
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
}

/// Body of `POST /critic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticRequest {
    pub global_goal: String,
    pub action_plan_list: Vec<StepWire>,
    /// One symbolic summary per sampled frame.
    #[serde(rename = "Video")]
    pub video: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerActionWire {
    pub verb: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(rename = "match")]
    pub matched: String,
    pub score: f64,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerEventWire {
    pub event_id: u32,
    pub score: f64,
    #[serde(default)]
    pub reason: String,
}

/// One scored dimension: a direct score, or itemized per-action or
/// per-event scores that are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_action: Option<Vec<PerActionWire>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_event: Option<Vec<PerEventWire>>,
}

impl DimensionWire {
    pub fn scored(score: f64, reason: &str) -> Self {
        Self { score: Some(score), reason: reason.to_string(), per_action: None, per_event: None }
    }

    fn resolve(&self) -> Option<f64> {
        let items: Vec<f64> = match (&self.per_action, &self.per_event) {
            (Some(a), _) if !a.is_empty() => a.iter().map(|x| x.score).collect(),
            (_, Some(e)) if !e.is_empty() => e.iter().map(|x| x.score).collect(),
            _ => Vec::new(),
        };
        self.score.or_else(|| (!items.is_empty()).then(|| items.iter().sum::<f64>() / items.len() as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresWire {
    pub action_adherence: DimensionWire,
    pub object_interaction: DimensionWire,
    pub goal_achievement: DimensionWire,
    pub temporal_coherence: DimensionWire,
    pub visual_physics_realism: DimensionWire,
}

impl ScoresWire {
    fn get(&self, d: Dimension) -> &DimensionWire {
        match d {
            Dimension::ActionAdherence => &self.action_adherence,
            Dimension::ObjectInteraction => &self.object_interaction,
            Dimension::GoalAchievement => &self.goal_achievement,
            Dimension::TemporalCoherence => &self.temporal_coherence,
            Dimension::PhysicalRealism => &self.visual_physics_realism,
        }
    }
}

/// Critic response. `feedback` (tag strings) and `revised_instruction` are
/// optional extensions; without them both are derived locally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticWire {
    pub scores: ScoresWire,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feedback: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_instruction: Option<String>,
}

/// Drops a leading `<think>...</think>` block and surrounding whitespace.
pub fn strip_think(text: &str) -> &str {
    let t = text.trim_start();
    match t.strip_prefix("<think>").and_then(|r| r.split_once("</think>")) {
        Some((_, rest)) => rest.trim(),
        None => t.trim_end(),
    }
}

/// Parses a whole response body or rejects it; nothing is partially used.
pub fn parse_wire<T: serde::de::DeserializeOwned>(what: &str, body: &str) -> Result<T> {
    serde_json::from_str(strip_think(body)).map_err(|e| Error::Schema(format!("{what} response: {e}")))
}

/// Wire form of a step, with condition phrases.
pub fn step_to_wire(spec: &DomainSpec, step: &PlanStep) -> StepWire {
    let phrases = |ls: &[Literal]| ls.iter().map(|l| spec.literal_phrase(*l)).collect();
    StepWire {
        sid: step.sid,
        text: step.instruction.clone(),
        actions: step
            .actions
            .iter()
            .map(|a| ActionWire { verb: a.verb.clone(), objects: a.objects.clone(), tool: a.tool.clone() })
            .collect(),
        pre: phrases(&step.pre),
        post: phrases(&step.post),
    }
}

pub fn plan_to_wire(spec: &DomainSpec, plan: &PlanSequence) -> PlanWire {
    PlanWire { steps: plan.steps.iter().map(|s| step_to_wire(spec, s)).collect() }
}

/// Grounds a wire step on the operator with the same verb, objects and tool.
/// Listed conditions must be among the operator's own; the step carries the
/// operator's full condition sets.
pub fn step_from_wire(spec: &DomainSpec, wire: &StepWire) -> Result<PlanStep> {
    let [action] = wire.actions.as_slice() else {
        return Err(Error::Schema(format!("step {} must name exactly one action, got {}", wire.sid, wire.actions.len())));
    };
    let op = (0..spec.operators.len())
        .map(OperatorId)
        .find(|&id| {
            let a = &PlanStep::from_operator(spec, 0, id).actions[0];
            *a == ActionSpec { verb: action.verb.clone(), objects: action.objects.clone(), tool: action.tool.clone() }
        })
        .ok_or_else(|| {
            Error::Schema(format!(
                "step {}: no operator {} {:?} with tool {:?}",
                wire.sid, action.verb, action.objects, action.tool
            ))
        })?;
    let grounded = PlanStep::from_operator(spec, wire.sid, op);
    for (kind, listed, own) in [("pre", &wire.pre, &grounded.pre), ("post", &wire.post, &grounded.post)] {
        for phrase in listed {
            let lit = spec.parse_literal(phrase).map_err(|e| Error::Schema(format!("step {} {kind}: {e}", wire.sid)))?;
            if !own.contains(&lit) {
                return Err(Error::Schema(format!(
                    "step {} {kind}-condition '{phrase}' is not a {kind}-condition of {}",
                    wire.sid,
                    spec.operator(op).name
                )));
            }
        }
    }
    let text = wire.text.trim();
    if text.is_empty() {
        return Err(Error::Schema(format!("step {} has an empty instruction", wire.sid)));
    }
    Ok(grounded.with_instruction(text.to_string()))
}

pub fn plan_from_wire(spec: &DomainSpec, wire: &PlanWire) -> Result<PlanSequence> {
    Ok(PlanSequence { steps: wire.steps.iter().map(|s| step_from_wire(spec, s)).collect::<Result<_>>()? })
}

/// `jar closed, tea leaves in cup; hand at 0.47, jar at 0.38`.
pub fn state_summary(spec: &DomainSpec, state: &SymbolicState) -> String {
    let facts: Vec<String> = (0..spec.predicates.len())
        .filter(|&p| state.predicates[p])
        .map(|p| spec.literal_phrase(Literal { predicate: p, value: true }))
        .collect();
    let poses: Vec<String> = (0..spec.entities.len())
        .filter_map(|e| spec.entity_pose_channel(e).map(|_| e))
        .zip(&state.poses)
        .map(|(e, x)| format!("{} at {x:.2}", spec.entities[e].name))
        .collect();
    let facts = if facts.is_empty() { "nothing notable".to_string() } else { facts.join(", ") };
    format!("{facts}; {}", poses.join(", "))
}

/// Summaries of the first, middle and last frames.
pub fn segment_summary(spec: &DomainSpec, segment: &Segment) -> Vec<String> {
    let n = segment.n_frames();
    let mut picks = vec![0, n / 2, n - 1];
    picks.dedup();
    picks
        .into_iter()
        .map(|f| format!("frame {f}: {}", state_summary(spec, &decode_frame(spec, segment.frame(f), DECODE_THRESHOLD))))
        .collect()
}

/// Builds a report from a validated response. Scores are clamped into
/// [0, 1] with a warning; the scalar is always recomputed from the local
/// weights. Condition checks come from decoding the segment.
pub fn report_from_wire(
    spec: &DomainSpec,
    segment: &Segment,
    step: &PlanStep,
    wire: &CriticWire,
    config: &CriticConfig,
) -> Result<CriticReport> {
    let applicable = interaction_applicable(spec, step);
    let mut scores = DimensionScores([0.0; 5]);
    let mut warnings = Vec::new();
    let mut reasons: [String; 5] = Default::default();
    for (i, d) in DIMENSIONS.into_iter().enumerate() {
        let dw = wire.scores.get(d);
        reasons[i] = dw.reason.clone();
        let raw = match dw.resolve() {
            Some(v) => v,
            None if d == Dimension::ObjectInteraction && !applicable => 1.0,
            None => return Err(Error::Schema(format!("{} carries no score", d.name()))),
        };
        if !raw.is_finite() {
            return Err(Error::Schema(format!("{} score is not finite", d.name())));
        }
        let v = raw.clamp(0.0, 1.0);
        if v != raw {
            warnings.push(format!("{} score {raw} clamped to {v}", d.name()));
        }
        scores.set(d, v);
    }
    let scalar = aggregate(&scores, &config.weights)?;
    let first = decode_frame(spec, segment.first_frame(), DECODE_THRESHOLD);
    let last = decode_frame(spec, segment.last_frame(), DECODE_THRESHOLD);
    let pre_held = first.holds_all(&step.pre);
    let mut tags = Vec::new();
    if scalar < config.tau {
        tags = if wire.feedback.is_empty() {
            derived_tags(step, &scores, &first, &last)
        } else {
            wire.feedback.iter().map(|t| FeedbackTag::parse(spec, t)).collect::<Result<_>>()?
        };
        if pre_held && !tags.contains(&FeedbackTag::RetrySame) {
            tags.push(FeedbackTag::RetrySame);
        }
    }
    let prose = match tags.is_empty() {
        true => format!("accepted with reward {scalar:.3}"),
        false => format!(
            "rejected with reward {scalar:.3}: {}",
            tags.iter().map(|t| t.render(spec)).collect::<Vec<_>>().join("; ")
        ),
    };
    let mut report = CriticReport {
        scores,
        scalar,
        tags,
        revised_instruction: String::new(),
        prose,
        reasons,
        pre_held,
        post_satisfied: last.holds_all(&step.post),
        interaction_applicable: applicable,
        warnings,
    };
    report.revised_instruction = match &wire.revised_instruction {
        Some(text) if !text.trim().is_empty() => text.trim().to_string(),
        _ => revise_instruction(spec, step, &report),
    };
    Ok(report)
}

/// Condition failures first, then imperfect dimensions from worst to best.
fn derived_tags(step: &PlanStep, scores: &DimensionScores, first: &SymbolicState, last: &SymbolicState) -> Vec<FeedbackTag> {
    let mut tags: Vec<FeedbackTag> = step.pre.iter().filter(|l| !first.holds(**l)).map(|l| FeedbackTag::PreconditionMissing(*l)).collect();
    tags.extend(step.post.iter().filter(|l| !last.holds(**l)).map(|l| FeedbackTag::PostConditionUnmet(*l)));
    let mut dims: Vec<(f64, FeedbackTag)> = [
        (Dimension::ActionAdherence, FeedbackTag::NoProgress),
        (Dimension::ObjectInteraction, FeedbackTag::WeakInteraction),
        (Dimension::TemporalCoherence, FeedbackTag::TemporalIncoherence),
        (Dimension::PhysicalRealism, FeedbackTag::PhysicsViolation),
    ]
    .into_iter()
    .filter(|(d, _)| scores.get(*d) < 1.0)
    .map(|(d, t)| (scores.get(d), t))
    .collect();
    dims.sort_by(|a, b| a.0.total_cmp(&b.0));
    tags.extend(dims.into_iter().map(|(_, t)| t));
    if tags.is_empty() {
        tags.push(FeedbackTag::NoProgress);
    }
    tags
}
