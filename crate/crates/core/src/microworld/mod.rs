//! Symbolic micro-world: entities with boolean predicates and 1-D poses,
//! grounded operators with pre/post-conditions, and the encoding of states
//! into continuous frames and trajectory segments.

mod domain;
mod reference;
mod segment;
mod state;

pub use domain::{
    load_domain, parse_domain, Channel, DomainSpec, Entity, Literal, Motion, Move, MoveTarget,
    Operator, OperatorId, Predicate, DEFAULT_CONTACT,
};
pub use reference::{reference_segment, MAX_REFERENCE_JITTER};
pub use segment::Segment;
pub use state::{
    apply_operator, decode_frame, encode_state, reachable_applications, SymbolicState, DECODE_THRESHOLD,
};
