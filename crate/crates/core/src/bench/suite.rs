use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::microworld::{apply_operator, DomainSpec, Literal, OperatorId, SymbolicState};
use crate::numerics::RandomSource;
use crate::planner::{plan_with_budget, Goal, DEFAULT_NODE_BUDGET};
use crate::{Error, Result};

/// Difficulty level by minimal plan length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Simple,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Simple, Difficulty::Medium, Difficulty::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Simple => "simple",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name).ok_or_else(|| Error::Schema(format!("unknown difficulty '{name}'")))
    }

    /// Inclusive plan-length band: 1-3, 4-5, 6 and up.
    pub fn band(self) -> (usize, usize) {
        match self {
            Difficulty::Simple => (1, 3),
            Difficulty::Medium => (4, 5),
            Difficulty::Hard => (6, usize::MAX),
        }
    }

    pub fn of_len(len: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|d| {
            let (lo, hi) = d.band();
            (lo..=hi).contains(&len)
        })
    }
}

/// One goal from one starting state.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub goal: Goal,
    pub initial: SymbolicState,
    pub difficulty: Difficulty,
    /// Minimal plan length.
    pub plan_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSuite {
    pub domain: String,
    pub seed: u64,
    pub tasks: Vec<Task>,
}

impl PromptSuite {
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for t in &self.tasks {
            c[t.difficulty as usize] += 1;
        }
        c
    }

    /// Hex SHA-256 of the canonical task listing; reports carry it so only
    /// results on the same suite are compared.
    pub fn hash(&self, spec: &DomainSpec) -> String {
        let mut text = format!("{}\n", spec.hash());
        for t in &self.tasks {
            text.push_str(&task_line(spec, t));
            text.push('\n');
        }
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self, spec: &DomainSpec) -> Value {
        json!({
            "domain": self.domain,
            "domain_hash": spec.hash(),
            "seed": self.seed,
            "suite_hash": self.hash(spec),
            "tasks": self.tasks.iter().map(|t| json!({
                "difficulty": t.difficulty.name(),
                "plan_len": t.plan_len,
                "goal": t.goal.target.iter().map(|l| spec.literal_key(*l)).collect::<Vec<_>>(),
                "initial_true": true_keys(spec, &t.initial),
                "initial_poses": t.initial.poses,
            })).collect::<Vec<_>>(),
        })
    }

    /// Reads a suite written by [`PromptSuite::to_json`], re-verifying every
    /// band against the planner.
    pub fn from_json(spec: &DomainSpec, value: &Value) -> Result<Self> {
        let field = |v: &Value, k: &str| v.get(k).cloned().ok_or_else(|| Error::Schema(format!("suite is missing '{k}'")));
        if field(value, "domain_hash")?.as_str() != Some(spec.hash()) {
            return Err(Error::Schema("suite was generated for a different domain".into()));
        }
        let seed = field(value, "seed")?.as_u64().ok_or_else(|| Error::Schema("seed must be an integer".into()))?;
        let tasks = field(value, "tasks")?;
        let tasks = tasks.as_array().ok_or_else(|| Error::Schema("tasks must be an array".into()))?;
        let mut out = Vec::with_capacity(tasks.len());
        for t in tasks {
            let strings = |k: &str| -> Result<Vec<String>> { Ok(serde_json::from_value(field(t, k)?)?) };
            let target = strings("goal")?.iter().map(|s| spec.parse_literal(s)).collect::<Result<Vec<_>>>()?;
            let mut initial = SymbolicState { predicates: vec![false; spec.predicates.len()], poses: serde_json::from_value(field(t, "initial_poses")?)? };
            if initial.poses.len() != spec.n_poses() {
                return Err(Error::Schema(format!("expected {} poses, got {}", spec.n_poses(), initial.poses.len())));
            }
            for key in strings("initial_true")? {
                initial.set(spec.parse_literal(&key)?);
            }
            let difficulty = Difficulty::from_name(field(t, "difficulty")?.as_str().unwrap_or(""))?;
            let goal = Goal::new(spec, target)?;
            let plan_len = min_plan_len(spec, &initial, &goal)?;
            if Difficulty::of_len(plan_len) != Some(difficulty) {
                return Err(Error::Schema(format!("task '{}' needs {plan_len} steps, outside the {} band", goal.description, difficulty.name())));
            }
            out.push(Task { goal, initial, difficulty, plan_len });
        }
        let suite = Self { domain: spec.name.clone(), seed, tasks: out };
        if let Some(h) = value.get("suite_hash").and_then(Value::as_str) {
            if h != suite.hash(spec) {
                return Err(Error::Schema("suite hash does not match its tasks".into()));
            }
        }
        Ok(suite)
    }
}

fn true_keys(spec: &DomainSpec, state: &SymbolicState) -> Vec<String> {
    (0..spec.predicates.len())
        .filter(|&p| state.predicates[p])
        .map(|p| spec.literal_key(Literal { predicate: p, value: true }))
        .collect()
}

fn task_line(spec: &DomainSpec, t: &Task) -> String {
    let goal: Vec<String> = t.goal.target.iter().map(|l| spec.literal_key(*l)).collect();
    let poses: Vec<String> = t.initial.poses.iter().map(|p| format!("{p:.6}")).collect();
    format!("{}|{}|{}|{}", t.difficulty.name(), goal.join(","), true_keys(spec, &t.initial).join(","), poses.join(","))
}

fn min_plan_len(spec: &DomainSpec, initial: &SymbolicState, goal: &Goal) -> Result<usize> {
    Ok(plan_with_budget(spec, goal, initial, DEFAULT_NODE_BUDGET)?.len())
}

fn random_walk(spec: &DomainSpec, from: &SymbolicState, steps: usize, rng: &mut RandomSource) -> SymbolicState {
    let mut state = from.clone();
    for _ in 0..steps {
        let next: Vec<SymbolicState> =
            (0..spec.operators.len()).filter_map(|i| apply_operator(spec, &state, OperatorId(i)).ok()).collect();
        if next.is_empty() {
            break;
        }
        state = next[rng.below(next.len())].clone();
    }
    state
}

const ATTEMPTS_PER_TASK: usize = 2_000;

/// Draws `n` distinct tasks whose minimal plan length lies in `[lo, hi]`.
/// Starting states are short random walks from the domain's initial state;
/// goals are random subsets of the literals a longer walk changes.
pub fn sample_tasks(spec: &DomainSpec, n: usize, lo: usize, hi: usize, rng: &mut RandomSource) -> Result<Vec<Task>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    let walk_max = lo.max(1) + 6;
    while out.len() < n {
        attempts += 1;
        if attempts > ATTEMPTS_PER_TASK * n.max(1) {
            return Err(Error::InvalidArgument(format!(
                "domain '{}' yields too few tasks with plans of {lo} to {hi} steps",
                spec.name
            )));
        }
        let initial = random_walk(spec, &spec.initial, rng.below(4), rng);
        let end = random_walk(spec, &initial, lo + rng.below(walk_max - lo + 1), rng);
        let target: Vec<Literal> = (0..spec.predicates.len())
            .filter(|&p| end.predicates[p] != initial.predicates[p] && rng.uniform() < 0.7)
            .map(|p| Literal { predicate: p, value: end.predicates[p] })
            .collect();
        if target.is_empty() {
            continue;
        }
        let goal = Goal::new(spec, target)?;
        let len = match min_plan_len(spec, &initial, &goal) {
            Ok(l) => l,
            Err(Error::NoPlan(_)) => continue,
            Err(e) => return Err(e),
        };
        if len < lo || len > hi {
            continue;
        }
        let probe = Task { goal, initial, difficulty: Difficulty::of_len(len).unwrap_or(Difficulty::Hard), plan_len: len };
        if seen.insert(task_line(spec, &probe)) {
            out.push(probe);
        }
    }
    Ok(out)
}

/// Difficulty-stratified suite with `counts` tasks per level (simple,
/// medium, hard). Deterministic in `seed`.
pub fn generate_suite(spec: &DomainSpec, seed: u64, counts: [usize; 3]) -> Result<PromptSuite> {
    let mut tasks = Vec::new();
    for (level, &n) in Difficulty::ALL.iter().zip(&counts) {
        let (lo, hi) = level.band();
        let mut rng = RandomSource::new(seed, *level as u64);
        let found = sample_tasks(spec, n, lo, hi, &mut rng).map_err(|_| {
            Error::InvalidArgument(format!("domain '{}' cannot produce {n} {} tasks", spec.name, level.name()))
        })?;
        tasks.extend(found);
    }
    Ok(PromptSuite { domain: spec.name.clone(), seed, tasks })
}
