use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SymbolicState;
use crate::{Error, Result};

/// Contact window used when an operator does not declare one.
pub const DEFAULT_CONTACT: (f64, f64) = (0.25, 0.75);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    name: String,
    actor: String,
    #[serde(default = "default_frames")]
    frames: usize,
    channels: Vec<String>,
    #[serde(default)]
    phrases: BTreeMap<String, String>,
    #[serde(default)]
    initial: RawInitial,
    entities: Vec<RawEntity>,
    #[serde(default)]
    operators: Vec<RawOperator>,
}

fn default_frames() -> usize {
    16
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default, rename = "true")]
    true_predicates: Vec<String>,
    #[serde(default)]
    poses: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntity {
    name: String,
    #[serde(default)]
    pose: Option<f64>,
    #[serde(default)]
    predicates: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    name: String,
    verb: String,
    objects: Vec<String>,
    #[serde(default)]
    tool: Option<String>,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    post: Vec<String>,
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    contact: Option<[f64; 2]>,
    #[serde(default)]
    moves: Vec<RawMove>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMove {
    entity: String,
    to: RawTarget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawTarget {
    Entity(String),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub name: String,
    pub home_pose: Option<f64>,
    /// Index into the state's pose vector.
    pub pose_slot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub entity: usize,
    /// Dotted identifier, e.g. `jar.closed`.
    pub key: String,
    pub phrase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Predicate(usize),
    Pose(usize),
}

/// A predicate with the truth value it must take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: usize,
    pub value: bool,
}

impl Literal {
    pub fn negate(self) -> Self {
        Literal { predicate: self.predicate, value: !self.value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveTarget {
    Entity(usize),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub entity: usize,
    pub to: MoveTarget,
}

/// Which poses an operator moves and when the contact happens.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    pub moves: Vec<Move>,
    /// Entity the actor has to be near during the contact window.
    pub target: Option<usize>,
    /// Fractions of the segment `[start, end]`.
    pub contact: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperatorId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub name: String,
    pub verb: String,
    pub objects: Vec<usize>,
    pub tool: Option<usize>,
    pub pre: Vec<Literal>,
    pub post: Vec<Literal>,
    pub motion: Motion,
}

impl Operator {
    /// Whether the operator changes any pose channel.
    pub fn has_motion(&self) -> bool {
        !self.motion.moves.is_empty()
    }
}

/// Validated, immutable description of a micro-world.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub name: String,
    pub actor: usize,
    pub frames: usize,
    pub entities: Vec<Entity>,
    pub predicates: Vec<Predicate>,
    pub channels: Vec<Channel>,
    pub operators: Vec<Operator>,
    pub initial: SymbolicState,
    pred_channel: Vec<usize>,
    pose_channel: Vec<usize>,
    hash: String,
}

impl PartialEq for DomainSpec {
    fn eq(&self, other: &Self) -> bool {
        self.hash == other.hash
    }
}

const KITCHEN: &str = include_str!("../../domains/kitchen.toml");
const WORKSHOP: &str = include_str!("../../domains/workshop.toml");

impl DomainSpec {
    /// One of the domains shipped with the crate (`kitchen`, `workshop`).
    pub fn bundled(name: &str) -> Result<Self> {
        let text = match name {
            "kitchen" => KITCHEN,
            "workshop" => WORKSHOP,
            other => return Err(Error::InvalidArgument(format!("no bundled domain named {other}"))),
        };
        parse_domain(text, Path::new(name))
    }

    pub fn kitchen() -> Self {
        Self::bundled("kitchen").expect("bundled kitchen domain is valid")
    }

    pub fn workshop() -> Self {
        Self::bundled("workshop").expect("bundled workshop domain is valid")
    }

    /// Channel width `d`.
    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn n_poses(&self) -> usize {
        self.pose_channel.len()
    }

    /// SHA-256 over the canonical form of the domain.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn predicate_channel(&self, predicate: usize) -> usize {
        self.pred_channel[predicate]
    }

    pub fn pose_channel(&self, slot: usize) -> usize {
        self.pose_channel[slot]
    }

    pub fn entity_pose_channel(&self, entity: usize) -> Option<usize> {
        self.entities[entity].pose_slot.map(|s| self.pose_channel[s])
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.name == name)
    }

    pub fn predicate_index(&self, key: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.key == key)
    }

    pub fn operator_index(&self, name: &str) -> Option<OperatorId> {
        self.operators.iter().position(|o| o.name == name).map(OperatorId)
    }

    pub fn operator(&self, id: OperatorId) -> &Operator {
        &self.operators[id.0]
    }

    /// Channel index for a `entity.predicate` or `entity.x` key.
    pub fn channel_index(&self, key: &str) -> Option<usize> {
        if let Some(p) = self.predicate_index(key) {
            return Some(self.pred_channel[p]);
        }
        let entity = key.strip_suffix(".x")?;
        self.entity_pose_channel(self.entity_index(entity)?)
    }

    /// Parses `jar.closed`, `!jar.closed`, `not jar.closed`, or a phrase
    /// (optionally prefixed with `not `).
    pub fn parse_literal(&self, text: &str) -> Result<Literal> {
        let text = text.trim();
        let (value, body) = if let Some(rest) = text.strip_prefix('!') {
            (false, rest.trim())
        } else if let Some(rest) = text.strip_prefix("not ") {
            (false, rest.trim())
        } else {
            (true, text)
        };
        let predicate = self
            .predicate_index(body)
            .or_else(|| self.predicates.iter().position(|p| p.phrase == body))
            .ok_or_else(|| Error::DanglingReference(format!("unknown predicate '{body}'")))?;
        Ok(Literal { predicate, value })
    }

    /// Human phrase, e.g. `jar closed` or `not jar closed`.
    pub fn literal_phrase(&self, lit: Literal) -> String {
        let phrase = &self.predicates[lit.predicate].phrase;
        if lit.value {
            phrase.clone()
        } else {
            format!("not {phrase}")
        }
    }

    /// Canonical key form, e.g. `jar.closed` or `!jar.closed`.
    pub fn literal_key(&self, lit: Literal) -> String {
        let key = &self.predicates[lit.predicate].key;
        if lit.value {
            key.clone()
        } else {
            format!("!{key}")
        }
    }

    pub fn display_literals(&self, lits: &[Literal]) -> LiteralList<'_> {
        LiteralList { spec: self, lits: lits.to_vec() }
    }
}

pub struct LiteralList<'a> {
    spec: &'a DomainSpec,
    lits: Vec<Literal>,
}

impl fmt::Display for LiteralList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.lits.iter().map(|l| self.spec.literal_phrase(*l)).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Reads and validates a domain file.
pub fn load_domain(path: &Path) -> Result<DomainSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_domain(&text, path)
}

pub fn parse_domain(text: &str, origin: &Path) -> Result<DomainSpec> {
    let raw: RawDomain = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    build(raw, origin)
}

fn build(raw: RawDomain, origin: &Path) -> Result<DomainSpec> {
    let canonical = serde_json::to_vec(&raw)?;
    let hash: String = Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect();
    let parse_err = |message: String| Error::Parse { path: origin.to_path_buf(), message };

    if raw.frames < 2 {
        return Err(parse_err(format!("frames must be at least 2, got {}", raw.frames)));
    }
    let mut entities = Vec::new();
    let mut entity_ids: HashMap<String, usize> = HashMap::new();
    let mut predicates = Vec::new();
    let mut pred_ids: HashMap<String, usize> = HashMap::new();
    let mut n_poses = 0;
    for (i, e) in raw.entities.iter().enumerate() {
        if entity_ids.insert(e.name.clone(), i).is_some() {
            return Err(parse_err(format!("duplicate entity '{}'", e.name)));
        }
        let pose_slot = e.pose.map(|p| {
            let slot = n_poses;
            n_poses += 1;
            (slot, p)
        });
        if let Some((_, p)) = pose_slot {
            if !(0.0..=1.0).contains(&p) {
                return Err(parse_err(format!("pose of '{}' outside [0,1]", e.name)));
            }
        }
        entities.push(Entity { name: e.name.clone(), home_pose: e.pose, pose_slot: pose_slot.map(|s| s.0) });
        for p in &e.predicates {
            let key = format!("{}.{}", e.name, p);
            if pred_ids.insert(key.clone(), predicates.len()).is_some() {
                return Err(parse_err(format!("duplicate predicate '{key}'")));
            }
            let phrase = raw
                .phrases
                .get(&key)
                .cloned()
                .unwrap_or_else(|| format!("{} {}", e.name, p.replace('_', " ")));
            predicates.push(Predicate { entity: i, key, phrase });
        }
    }
    for key in raw.phrases.keys() {
        if !pred_ids.contains_key(key) {
            return Err(Error::DanglingReference(format!("phrase for unknown predicate '{key}'")));
        }
    }
    let entity = |name: &str, ctx: &str| -> Result<usize> {
        entity_ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::DanglingReference(format!("{ctx}: unknown entity '{name}'")))
    };
    let actor = entity(&raw.actor, "actor")?;

    // channel layout
    let mut pred_channel = vec![usize::MAX; predicates.len()];
    let mut pose_channel = vec![usize::MAX; n_poses];
    let mut channels = Vec::with_capacity(raw.channels.len());
    for (c, key) in raw.channels.iter().enumerate() {
        let channel = if let Some(&p) = pred_ids.get(key) {
            if pred_channel[p] != usize::MAX {
                return Err(Error::DuplicateChannel(key.clone()));
            }
            pred_channel[p] = c;
            Channel::Predicate(p)
        } else if let Some(name) = key.strip_suffix(".x") {
            let e = entity(name, "channel")?;
            let slot = entities[e]
                .pose_slot
                .ok_or_else(|| Error::DanglingReference(format!("entity '{name}' has no pose")))?;
            if pose_channel[slot] != usize::MAX {
                return Err(Error::DuplicateChannel(key.clone()));
            }
            pose_channel[slot] = c;
            Channel::Pose(slot)
        } else {
            return Err(Error::DanglingReference(format!("channel '{key}' names no predicate or pose")));
        };
        channels.push(channel);
    }
    if let Some(p) = pred_channel.iter().position(|&c| c == usize::MAX) {
        return Err(parse_err(format!("predicate '{}' has no channel", predicates[p].key)));
    }
    if let Some(s) = pose_channel.iter().position(|&c| c == usize::MAX) {
        let name = &entities.iter().find(|e| e.pose_slot == Some(s)).unwrap().name;
        return Err(parse_err(format!("pose of '{name}' has no channel")));
    }

    let literal = |text: &str, ctx: &str| -> Result<Literal> {
        let (value, body) = match text.strip_prefix('!') {
            Some(rest) => (false, rest),
            None => (true, text),
        };
        let predicate = pred_ids
            .get(body)
            .copied()
            .ok_or_else(|| Error::DanglingReference(format!("{ctx}: unknown predicate '{body}'")))?;
        Ok(Literal { predicate, value })
    };

    let mut operators = Vec::new();
    let mut op_names = HashMap::new();
    for o in &raw.operators {
        if op_names.insert(o.name.clone(), ()).is_some() {
            return Err(parse_err(format!("duplicate operator '{}'", o.name)));
        }
        let ctx = format!("operator '{}'", o.name);
        let objects = o.objects.iter().map(|n| entity(n, &ctx)).collect::<Result<Vec<_>>>()?;
        if objects.is_empty() {
            return Err(parse_err(format!("{ctx} has no objects")));
        }
        let tool = o.tool.as_deref().map(|n| entity(n, &ctx)).transpose()?;
        let pre = o.pre.iter().map(|l| literal(l, &ctx)).collect::<Result<Vec<_>>>()?;
        let post = o.post.iter().map(|l| literal(l, &ctx)).collect::<Result<Vec<_>>>()?;
        for list in [&pre, &post] {
            for l in list.iter() {
                if list.contains(&l.negate()) {
                    return Err(parse_err(format!("{ctx} lists a literal and its negation")));
                }
            }
        }
        let target = o.target.as_deref().map(|n| entity(n, &ctx)).transpose()?;
        let contact = match o.contact {
            Some([a, b]) if 0.0 <= a && a < b && b <= 1.0 => (a, b),
            Some(c) => return Err(parse_err(format!("{ctx}: bad contact window {c:?}"))),
            None => DEFAULT_CONTACT,
        };
        let mut moves = Vec::new();
        for m in &o.moves {
            let e = entity(&m.entity, &ctx)?;
            if entities[e].pose_slot.is_none() {
                return Err(Error::DanglingReference(format!("{ctx}: entity '{}' has no pose", m.entity)));
            }
            let to = match &m.to {
                RawTarget::Entity(n) => {
                    let t = entity(n, &ctx)?;
                    if entities[t].pose_slot.is_none() {
                        return Err(Error::DanglingReference(format!("{ctx}: entity '{n}' has no pose")));
                    }
                    MoveTarget::Entity(t)
                }
                RawTarget::Value(v) if (0.0..=1.0).contains(v) => MoveTarget::Value(*v),
                RawTarget::Value(v) => return Err(parse_err(format!("{ctx}: pose target {v} outside [0,1]"))),
            };
            moves.push(Move { entity: e, to });
        }
        operators.push(Operator {
            name: o.name.clone(),
            verb: o.verb.clone(),
            objects,
            tool,
            pre,
            post,
            motion: Motion { moves, target, contact },
        });
    }

    let mut initial = SymbolicState {
        predicates: vec![false; predicates.len()],
        poses: vec![0.0; n_poses],
    };
    for e in &entities {
        if let (Some(slot), Some(p)) = (e.pose_slot, e.home_pose) {
            initial.poses[slot] = p;
        }
    }
    for key in &raw.initial.true_predicates {
        let p = pred_ids
            .get(key)
            .ok_or_else(|| Error::DanglingReference(format!("initial: unknown predicate '{key}'")))?;
        initial.predicates[*p] = true;
    }
    for (key, v) in &raw.initial.poses {
        let name = key.strip_suffix(".x").unwrap_or(key);
        let e = entity(name, "initial")?;
        let slot = entities[e]
            .pose_slot
            .ok_or_else(|| Error::DanglingReference(format!("initial: entity '{name}' has no pose")))?;
        initial.poses[slot] = v.clamp(0.0, 1.0);
    }

    Ok(DomainSpec {
        name: raw.name,
        actor,
        frames: raw.frames,
        entities,
        predicates,
        channels,
        operators,
        initial,
        pred_channel,
        pose_channel,
        hash,
    })
}
