use super::feedback::{revise_instruction, FeedbackTag};
use crate::microworld::{decode_frame, DomainSpec, Literal, Segment, DECODE_THRESHOLD};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Actor-to-target distance counted as contact.
pub const CONTACT_RADIUS: f64 = 0.15;
/// Mean squared second difference at which coherence reaches 0.
pub const COHERENCE_SCALE: f64 = 0.01;
/// Largest per-frame channel change a plausible motion makes.
pub const MAX_FRAME_DELTA: f64 = 0.25;
/// Valid channel range, with a small tolerance around [0, 1].
pub const VALUE_RANGE: (f64, f64) = (-0.05, 1.05);
/// Fraction of frame transitions that must not move away from the targets.
pub const PROGRESS_FRACTION: f64 = 0.8;
/// Increase in target distance tolerated between consecutive frames.
pub const PROGRESS_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    ActionAdherence,
    ObjectInteraction,
    GoalAchievement,
    TemporalCoherence,
    PhysicalRealism,
}

pub const DIMENSIONS: [Dimension; 5] = [
    Dimension::ActionAdherence,
    Dimension::ObjectInteraction,
    Dimension::GoalAchievement,
    Dimension::TemporalCoherence,
    Dimension::PhysicalRealism,
];

impl Dimension {
    /// Wire name.
    pub fn name(self) -> &'static str {
        match self {
            Dimension::ActionAdherence => "action_adherence",
            Dimension::ObjectInteraction => "object_interaction",
            Dimension::GoalAchievement => "goal_achievement",
            Dimension::TemporalCoherence => "temporal_coherence",
            Dimension::PhysicalRealism => "physical_realism",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        DIMENSIONS.into_iter().find(|d| d.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One score in [0, 1] per dimension, indexed in [`DIMENSIONS`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionScores(pub [f64; 5]);

impl DimensionScores {
    pub fn get(&self, d: Dimension) -> f64 {
        self.0[d.index()]
    }

    pub fn set(&mut self, d: Dimension, v: f64) {
        self.0[d.index()] = v;
    }

    pub fn adherence(&self) -> f64 {
        self.get(Dimension::ActionAdherence)
    }

    pub fn coherence(&self) -> f64 {
        self.get(Dimension::TemporalCoherence)
    }
}

/// Non-negative aggregation weights summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticWeights(pub [f64; 5]);

impl Default for CriticWeights {
    fn default() -> Self {
        CriticWeights([0.4, 0.15, 0.2, 0.15, 0.1])
    }
}

impl CriticWeights {
    pub fn uniform() -> Self {
        CriticWeights([0.2; 5])
    }

    /// All weight on one dimension.
    pub fn only(d: Dimension) -> Self {
        let mut w = [0.0; 5];
        w[d.index()] = 1.0;
        CriticWeights(w)
    }

    pub fn get(&self, d: Dimension) -> f64 {
        self.0[d.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("critic weights {:?} are not on the simplex", self.0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticConfig {
    pub weights: CriticWeights,
    /// Acceptance threshold on the scalar reward.
    pub tau: f64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig { weights: CriticWeights::default(), tau: 0.7 }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticReport {
    pub scores: DimensionScores,
    pub scalar: f64,
    /// Failure causes, most severe first. Empty iff the segment is accepted.
    pub tags: Vec<FeedbackTag>,
    pub revised_instruction: String,
    pub prose: String,
    /// One short justification per dimension.
    pub reasons: [String; 5],
    /// Whether all pre literals held at frame 0.
    pub pre_held: bool,
    /// Whether all post literals hold at the final frame.
    pub post_satisfied: bool,
    /// False when the step has no contact target (interaction is N/A).
    pub interaction_applicable: bool,
    /// Non-fatal issues, such as out-of-range remote scores.
    pub warnings: Vec<String>,
}

impl CriticReport {
    pub fn accepted(&self, tau: f64) -> bool {
        self.scalar >= tau
    }
}

/// Weighted mean of the dimension scores.
pub fn aggregate(scores: &DimensionScores, weights: &CriticWeights) -> Result<f64> {
    weights.validate()?;
    let r: f64 = scores.0.iter().zip(weights.0.iter()).map(|(s, w)| s * w).sum();
    Ok(r.clamp(0.0, 1.0))
}

/// Scores segments against plan steps. The built-in implementation is
/// [`ProgrammaticCritic`]; remote backends implement it over the wire.
pub trait Critic: Sync {
    fn evaluate(&self, spec: &DomainSpec, segment: &Segment, step: &PlanStep) -> Result<CriticReport>;
    fn config(&self) -> &CriticConfig;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProgrammaticCritic {
    pub config: CriticConfig,
}

impl ProgrammaticCritic {
    pub fn new(config: CriticConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Critic for ProgrammaticCritic {
    fn evaluate(&self, spec: &DomainSpec, segment: &Segment, step: &PlanStep) -> Result<CriticReport> {
        evaluate(spec, segment, step, &self.config)
    }

    fn config(&self) -> &CriticConfig {
        &self.config
    }
}

fn fraction<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    if items.is_empty() {
        return 1.0;
    }
    items.iter().filter(|x| pred(x)).count() as f64 / items.len() as f64
}

/// Contact-window frame indices for a segment of `n` frames.
/// Whether the step has a contact target with a pose, so that object
/// interaction can be scored at all.
pub fn interaction_applicable(spec: &DomainSpec, step: &PlanStep) -> bool {
    let op = spec.operator(step.operator);
    op.motion.target.and_then(|t| spec.entity_pose_channel(t)).is_some() && spec.entity_pose_channel(spec.actor).is_some()
}

pub(crate) fn contact_frames(contact: (f64, f64), n: usize) -> std::ops::RangeInclusive<usize> {
    let last = (n - 1) as f64;
    let a = (contact.0 * last).floor() as usize;
    let b = ((contact.1 * last).ceil() as usize).min(n - 1);
    a..=b
}

/// Per-dimension measurements shared by the scorer and the reward-model
/// features.
pub(crate) struct Measurements {
    pub pre_frac: f64,
    pub post_frac: f64,
    pub progress_frac: f64,
    pub contact: Option<(f64, f64)>,
    pub mean_sq_second_diff: f64,
    pub ok_frame_frac: f64,
    pub max_delta: f64,
}

pub(crate) fn measure(spec: &DomainSpec, segment: &Segment, step: &PlanStep) -> Result<Measurements> {
    if segment.width() != spec.width() {
        return Err(Error::Shape(format!("segment width {} but domain width {}", segment.width(), spec.width())));
    }
    if segment.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("segment values".into()));
    }
    let n = segment.n_frames();
    let first = decode_frame(spec, segment.first_frame(), DECODE_THRESHOLD);
    let last = decode_frame(spec, segment.last_frame(), DECODE_THRESHOLD);
    let pre_frac = fraction(&step.pre, |l: &Literal| first.holds(*l));
    let post_frac = fraction(&step.post, |l: &Literal| last.holds(*l));

    let target = |l: &Literal| if l.value { 1.0 } else { 0.0 };
    let dist = |f: usize| -> f64 {
        let frame = segment.frame(f);
        step.post.iter().map(|l| (frame[spec.predicate_channel(l.predicate)] - target(l)).abs()).sum()
    };
    let dists: Vec<f64> = (0..n).map(dist).collect();
    let steps: Vec<usize> = (1..n).collect();
    let progress_frac = fraction(&steps, |&f| dists[f] <= dists[f - 1] + PROGRESS_SLACK);

    let op = spec.operator(step.operator);
    let contact = match (op.motion.target.and_then(|t| spec.entity_pose_channel(t)), spec.entity_pose_channel(spec.actor)) {
        (Some(tc), Some(ac)) if tc != ac => {
            let frames: Vec<usize> = contact_frames(op.motion.contact, n).collect();
            let near = fraction(&frames, |&f| (segment.frame(f)[ac] - segment.frame(f)[tc]).abs() <= CONTACT_RADIUS);
            let mean_gap =
                frames.iter().map(|&f| (segment.frame(f)[ac] - segment.frame(f)[tc]).abs()).sum::<f64>() / frames.len() as f64;
            Some((near, mean_gap))
        }
        _ => None,
    };

    let d = segment.width();
    let mut sq = 0.0;
    for f in 1..n.saturating_sub(1) {
        let (a, b, c) = (segment.frame(f - 1), segment.frame(f), segment.frame(f + 1));
        sq += (0..d).map(|i| (c[i] - 2.0 * b[i] + a[i]).powi(2)).sum::<f64>();
    }
    let mean_sq_second_diff = if n > 2 { sq / ((n - 2) * d) as f64 } else { 0.0 };

    let mut ok = 0;
    let mut max_delta: f64 = 0.0;
    for f in 0..n {
        let frame = segment.frame(f);
        let delta = if f == 0 {
            0.0
        } else {
            let prev = segment.frame(f - 1);
            (0..d).map(|i| (frame[i] - prev[i]).abs()).fold(0.0, f64::max)
        };
        max_delta = max_delta.max(delta);
        let in_range = frame.iter().all(|v| (VALUE_RANGE.0..=VALUE_RANGE.1).contains(v));
        if in_range && delta <= MAX_FRAME_DELTA {
            ok += 1;
        }
    }
    Ok(Measurements {
        pre_frac,
        post_frac,
        progress_frac,
        contact,
        mean_sq_second_diff,
        ok_frame_frac: ok as f64 / n as f64,
        max_delta,
    })
}

impl Measurements {
    pub fn scores(&self) -> DimensionScores {
        let progress = (self.progress_frac / PROGRESS_FRACTION).min(1.0);
        let adherence = if self.pre_frac == 1.0 && self.post_frac == 1.0 && progress == 1.0 {
            1.0
        } else {
            0.25 * self.pre_frac + 0.5 * self.post_frac + 0.25 * progress
        };
        let interaction = self.contact.map_or(1.0, |(near, _)| near);
        let coherence = 1.0 - (self.mean_sq_second_diff / COHERENCE_SCALE).clamp(0.0, 1.0);
        let severity = ((self.max_delta - MAX_FRAME_DELTA) / (2.0 * MAX_FRAME_DELTA)).clamp(0.0, 1.0);
        let realism = self.ok_frame_frac * (1.0 - severity);
        DimensionScores([adherence, interaction, self.post_frac, coherence, realism])
    }
}

/// Deterministic five-dimension critique of `segment` as an execution of `step`.
///
/// - goal achievement: fraction of post literals true in the decoded final frame;
/// - action adherence: 1 when pre literals hold at frame 0, post literals hold at
///   the end, and the post-literal channels approach their targets on at least
///   80% of frame transitions; otherwise `0.25·pre + 0.5·post + 0.25·progress`;
/// - object interaction: fraction of contact-window frames where the actor is
///   within [`CONTACT_RADIUS`] of the target entity (1 when there is no target);
/// - temporal coherence: `1 − clamp(mean squared second difference / 0.01)`;
/// - physical realism: fraction of frames in range and within
///   [`MAX_FRAME_DELTA`] of their predecessor, scaled down linearly as the
///   worst jump grows from 0.25 to 0.75.
pub fn evaluate(spec: &DomainSpec, segment: &Segment, step: &PlanStep, config: &CriticConfig) -> Result<CriticReport> {
    config.validate()?;
    let m = measure(spec, segment, step)?;
    let scores = m.scores();
    let scalar = aggregate(&scores, &config.weights)?;
    let first = decode_frame(spec, segment.first_frame(), DECODE_THRESHOLD);
    let last = decode_frame(spec, segment.last_frame(), DECODE_THRESHOLD);

    let reasons = [
        format!(
            "pre {:.0}% at start, post {:.0}% at end, progress on {:.0}% of frames",
            100.0 * m.pre_frac,
            100.0 * m.post_frac,
            100.0 * m.progress_frac
        ),
        match m.contact {
            Some((near, gap)) => format!("actor near target in {:.0}% of contact frames, mean gap {gap:.3}", 100.0 * near),
            None => "no contact target (n/a)".to_string(),
        },
        format!("{} of {} post-conditions reached", step.post.iter().filter(|l| last.holds(**l)).count(), step.post.len()),
        format!("mean squared second difference {:.5}", m.mean_sq_second_diff),
        format!("{:.0}% of frames plausible, largest jump {:.3}", 100.0 * m.ok_frame_frac, m.max_delta),
    ];

    let mut tags = Vec::new();
    if scalar < config.tau {
        // (severity score, tie order, tag)
        let mut ranked: Vec<(f64, usize, FeedbackTag)> = Vec::new();
        let mut push = |d: Dimension, tag: FeedbackTag| {
            let order = ranked.len();
            ranked.push((scores.get(d), order, tag));
        };
        for &l in &step.pre {
            if !first.holds(l) {
                push(Dimension::ActionAdherence, FeedbackTag::PreconditionMissing(l));
            }
        }
        for &l in &step.post {
            if !last.holds(l) {
                push(Dimension::GoalAchievement, FeedbackTag::PostConditionUnmet(l));
            }
        }
        if m.progress_frac < PROGRESS_FRACTION {
            push(Dimension::ActionAdherence, FeedbackTag::NoProgress);
        }
        for (d, tag) in [
            (Dimension::ObjectInteraction, FeedbackTag::WeakInteraction),
            (Dimension::TemporalCoherence, FeedbackTag::TemporalIncoherence),
            (Dimension::PhysicalRealism, FeedbackTag::PhysicsViolation),
        ] {
            if scores.get(d) < 1.0 {
                push(d, tag);
            }
        }
        if ranked.is_empty() {
            // only reachable with unusual weights
            ranked.push((scores.adherence(), 0, FeedbackTag::NoProgress));
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        tags = ranked.into_iter().map(|(_, _, t)| t).collect();
        if m.pre_frac == 1.0 {
            tags.push(FeedbackTag::RetrySame);
        }
    }

    let prose = if tags.is_empty() {
        format!("accepted with reward {scalar:.3}")
    } else {
        let worst = DIMENSIONS.into_iter().min_by(|a, b| scores.get(*a).total_cmp(&scores.get(*b))).unwrap();
        format!(
            "rejected with reward {scalar:.3}; weakest dimension {} ({:.3}): {}",
            worst.name(),
            scores.get(worst),
            tags.iter().map(|t| t.render(spec)).collect::<Vec<_>>().join("; ")
        )
    };
    let mut report = CriticReport {
        scores,
        scalar,
        tags,
        revised_instruction: String::new(),
        prose,
        reasons,
        pre_held: m.pre_frac == 1.0,
        post_satisfied: m.post_frac == 1.0,
        interaction_applicable: m.contact.is_some(),
        warnings: Vec::new(),
    };
    report.revised_instruction = revise_instruction(spec, step, &report);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microworld::{reference_segment, OperatorId};
    use crate::numerics::RandomSource;
    use crate::planner::PlanStep;
    use proptest::prelude::*;

    #[test]
    fn aggregate_examples() {
        let ones = DimensionScores([1.0; 5]);
        assert_eq!(aggregate(&ones, &CriticWeights::default()).unwrap(), 1.0);
        let s = DimensionScores([1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!((aggregate(&s, &CriticWeights::uniform()).unwrap() - 0.6).abs() < 1e-15);
        let s = DimensionScores([0.37, 0.1, 0.9, 0.2, 0.4]);
        let only = CriticWeights::only(Dimension::ActionAdherence);
        assert_eq!(aggregate(&s, &only).unwrap(), 0.37);
        assert!(aggregate(&s, &CriticWeights([0.5, 0.5, 0.5, 0.0, 0.0])).is_err());
        assert!(aggregate(&s, &CriticWeights([1.2, -0.2, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn reference_segments_score_high() {
        for spec in [DomainSpec::kitchen(), DomainSpec::workshop()] {
            let mut rng = RandomSource::new(3, 0);
            for (state, op) in crate::microworld::reachable_applications(&spec) {
                let step = PlanStep::from_operator(&spec, 1, op);
                for jitter in [0.0, 0.02] {
                    let seg = reference_segment(&spec, &state, op, spec.frames, jitter, &mut rng).unwrap();
                    let r = evaluate(&spec, &seg, &step, &CriticConfig::default()).unwrap();
                    assert!(r.scores.adherence() >= 0.9, "{} {:?}", spec.operator(op).name, r.scores);
                    assert!(r.scalar >= 0.8, "{} {:?}", spec.operator(op).name, r.scores);
                    assert!(r.tags.is_empty());
                    assert_eq!(r.revised_instruction, step.instruction);
                }
            }
        }
    }

    #[test]
    fn frozen_segment_is_rejected() {
        let k = DomainSpec::kitchen();
        let op = k.operator_index("open_jar").unwrap();
        let step = PlanStep::from_operator(&k, 1, op);
        let frame = crate::microworld::encode_state(&k, &k.initial);
        let seg = Segment::frozen(&frame, k.frames).unwrap();
        let r = evaluate(&k, &seg, &step, &CriticConfig::default()).unwrap();
        assert_eq!(r.scores.get(Dimension::GoalAchievement), 0.0);
        assert!(r.scores.adherence() < 0.7);
        assert!(r.scalar < 0.7);
        assert!(matches!(r.tags[0], FeedbackTag::PostConditionUnmet(_)));
        assert!(r.tags.iter().any(|t| t.render(&k).starts_with("post-condition-unmet")));
        assert_eq!(r.tags.last(), Some(&FeedbackTag::RetrySame));
        assert_ne!(r.revised_instruction, step.instruction);
    }

    #[test]
    fn teleport_is_a_physics_violation() {
        let k = DomainSpec::kitchen();
        let op = k.operator_index("open_jar").unwrap();
        let step = PlanStep::from_operator(&k, 1, op);
        let mut rng = RandomSource::new(0, 0);
        let mut seg = reference_segment(&k, &k.initial, op, k.frames, 0.0, &mut rng).unwrap();
        // the hand jumps by 0.9 halfway through
        let hand = k.channel_index("hand.x").unwrap();
        for f in 0..k.frames {
            seg.frame_mut(f)[hand] = if f < 8 { 0.05 } else { 0.95 };
        }
        let r = evaluate(&k, &seg, &step, &CriticConfig::default()).unwrap();
        assert!(r.scores.get(Dimension::PhysicalRealism) < 0.5, "{:?}", r.scores);
        assert!(r.scalar < 0.7, "{}", r.scalar);
        assert!(r.tags.contains(&FeedbackTag::PhysicsViolation));
    }

    #[test]
    fn no_target_means_full_interaction() {
        let w = DomainSpec::workshop();
        let g = crate::planner::Goal::parse(&w, "board.measured").unwrap();
        let p = crate::planner::plan(&w, &g, &w.initial).unwrap();
        let op = p.steps[0].operator;
        let mut rng = RandomSource::new(0, 0);
        let seg = reference_segment(&w, &w.initial, op, w.frames, 0.0, &mut rng).unwrap();
        let r = evaluate(&w, &seg, &p.steps[0], &CriticConfig::default()).unwrap();
        assert_eq!(r.interaction_applicable, w.operator(op).motion.target.is_some());
    }

    #[test]
    fn width_mismatch_rejected() {
        let k = DomainSpec::kitchen();
        let step = PlanStep::from_operator(&k, 1, OperatorId(0));
        let seg = Segment::frozen(&[0.0; 3], 4).unwrap();
        assert!(matches!(evaluate(&k, &seg, &step, &CriticConfig::default()), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn scores_stay_in_unit_interval(values in prop::collection::vec(-3.0f64..3.0, 16 * 12), op in 0usize..8) {
            let k = DomainSpec::kitchen();
            let step = PlanStep::from_operator(&k, 1, OperatorId(op));
            let seg = Segment::new(16, 12, values).unwrap();
            let r = evaluate(&k, &seg, &step, &CriticConfig::default()).unwrap();
            for s in r.scores.0 {
                prop_assert!((0.0..=1.0).contains(&s));
            }
            prop_assert!((0.0..=1.0).contains(&r.scalar));
            prop_assert_eq!(r.tags.is_empty(), r.scalar >= 0.7);
            let again = evaluate(&k, &seg, &step, &CriticConfig::default()).unwrap();
            prop_assert_eq!(r, again);
        }

        #[test]
        fn scalar_monotone_in_each_dimension(
            s in prop::array::uniform5(0.0f64..1.0),
            bump in 0.0f64..1.0,
            dim in 0usize..5,
        ) {
            let w = CriticWeights::default();
            let base = aggregate(&DimensionScores(s), &w).unwrap();
            let mut t = s;
            t[dim] = (t[dim] + bump).min(1.0);
            prop_assert!(aggregate(&DimensionScores(t), &w).unwrap() >= base);
        }
    }
}
