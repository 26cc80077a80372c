use crate::critic::{rm_score, segment_features, CriticReport, RewardModelParams};
use crate::microworld::{DomainSpec, Segment};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Piecewise-constant cap on plan length. Each level starts at its
/// iteration (1-based, left-closed) and lasts until the next level starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Curriculum {
    /// `(first iteration, max plan length)`, starts strictly increasing.
    pub levels: Vec<(usize, usize)>,
}

impl Curriculum {
    /// Thirds of `iterations` at plan lengths 1, up to 3 and up to 5.
    pub fn thirds(iterations: usize) -> Self {
        let third = (iterations / 3).max(1);
        Self { levels: vec![(1, 1), (third + 1, 3), (2 * third + 1, 5)] }
    }

    /// A single level covering every iteration.
    pub fn flat(max_len: usize) -> Self {
        Self { levels: vec![(1, max_len)] }
    }

    /// Parses `1:1,101:3,201:5`.
    pub fn parse(text: &str) -> Result<Self> {
        let levels = text
            .split(',')
            .map(|part| {
                let (a, b) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("curriculum entry '{part}' is not start:max_len")))?;
                let num = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad number '{s}' in curriculum")));
                Ok((num(a)?, num(b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let c = Self { levels };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.levels.first().ok_or_else(|| Error::Config("curriculum has no levels".into()))?;
        if first.0 != 1 {
            return Err(Error::Config("curriculum must start at iteration 1".into()));
        }
        for w in self.levels.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::Config("curriculum starts must increase and lengths must not decrease".into()));
            }
        }
        if self.levels.iter().any(|l| l.1 == 0) {
            return Err(Error::Config("curriculum plan lengths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        self.levels.iter().map(|(s, l)| format!("{s}:{l}")).collect::<Vec<_>>().join(",")
    }
}

/// Max plan length at a 1-based iteration. Iterations past the last start
/// stay on the last level.
pub fn curriculum_schedule(curriculum: &Curriculum, iteration: usize) -> Result<usize> {
    if iteration == 0 {
        return Err(Error::InvalidArgument("iterations are numbered from 1".into()));
    }
    curriculum.validate()?;
    Ok(curriculum.levels.iter().rev().find(|(start, _)| *start <= iteration).map(|l| l.1).expect("first level starts at 1"))
}

/// What a rollout member is rewarded with.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSource {
    /// The critic scalar.
    Programmatic,
    /// Action adherence alone.
    Adherence,
    /// `(1 - weight) * scalar + weight * sigmoid(reward model score)`.
    Blended { model: RewardModelParams, weight: f64 },
}

impl RewardSource {
    pub fn name(&self) -> &'static str {
        match self {
            RewardSource::Programmatic => "programmatic",
            RewardSource::Adherence => "adherence",
            RewardSource::Blended { .. } => "blended",
        }
    }

    pub fn reward(&self, spec: &DomainSpec, segment: &Segment, step: &PlanStep, report: &CriticReport) -> Result<f64> {
        Ok(match self {
            RewardSource::Programmatic => report.scalar,
            RewardSource::Adherence => report.scores.adherence(),
            RewardSource::Blended { model, weight } => {
                let s = rm_score(model, &segment_features(spec, segment, step)?)?;
                ((1.0 - weight) * report.scalar + weight / (1.0 + (-s).exp())).clamp(0.0, 1.0)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrpoConfig {
    pub group_size: usize,
    /// Ratio clip range.
    pub epsilon: f64,
    /// KL coefficient toward the reference policy.
    pub beta: f64,
    /// Advantage denominator floor.
    pub delta: f64,
    pub lr: f64,
    pub iterations: usize,
    pub curriculum: Curriculum,
    pub reward: RewardSource,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            epsilon: 0.2,
            beta: 0.01,
            delta: 1e-8,
            lr: 3e-4,
            iterations: 300,
            curriculum: Curriculum::thirds(300),
            reward: RewardSource::Programmatic,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config(format!("group size {} must be at least 2", self.group_size)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta {} must be >= 0", self.beta)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta {} must be positive", self.delta)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if let RewardSource::Blended { weight, .. } = &self.reward {
            if !(0.0..=1.0).contains(weight) {
                return Err(Error::Config(format!("blend weight {weight} outside [0, 1]")));
            }
        }
        self.curriculum.validate()
    }
}
