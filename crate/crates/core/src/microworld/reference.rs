use super::{apply_operator, encode_state, DomainSpec, OperatorId, Segment, SymbolicState};
use crate::numerics::RandomSource;
use crate::{Error, Result};

/// Upper bound on the interior-frame jitter of demonstration segments.
pub const MAX_REFERENCE_JITTER: f64 = 0.02;

/// Demonstration segment for one operator application.
///
/// Pose channels move linearly from the pre-state to the post-state over the
/// whole segment. Predicate channels that change ramp linearly across the
/// operator's contact window. Interior frames receive uniform jitter in
/// `[-jitter, jitter]` and are clipped to [0, 1]; the end frames are exact
/// encodings of the two states.
pub fn reference_segment(
    spec: &DomainSpec,
    state: &SymbolicState,
    op: OperatorId,
    n_frames: usize,
    jitter: f64,
    rng: &mut RandomSource,
) -> Result<Segment> {
    if n_frames < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 frames, got {n_frames}")));
    }
    if !(0.0..=MAX_REFERENCE_JITTER).contains(&jitter) {
        return Err(Error::InvalidArgument(format!(
            "jitter {jitter} outside [0, {MAX_REFERENCE_JITTER}]"
        )));
    }
    let next = apply_operator(spec, state, op)?;
    let start = encode_state(spec, state);
    let end = encode_state(spec, &next);
    let (c0, c1) = spec.operator(op).motion.contact;
    let d = spec.width();
    let mut values = Vec::with_capacity(n_frames * d);
    for f in 0..n_frames {
        let s = f as f64 / (n_frames - 1) as f64;
        let ramp = ((s - c0) / (c1 - c0)).clamp(0.0, 1.0);
        for c in 0..d {
            let (a, b) = (start[c], end[c]);
            let v = match spec.channels[c] {
                super::Channel::Pose(_) => a + (b - a) * s,
                super::Channel::Predicate(_) => a + (b - a) * ramp,
            };
            values.push(v);
        }
    }
    values[..d].copy_from_slice(&start);
    values[(n_frames - 1) * d..].copy_from_slice(&end);
    if jitter > 0.0 {
        for v in &mut values[d..(n_frames - 1) * d] {
            *v = (*v + rng.uniform_range(-jitter, jitter)).clamp(0.0, 1.0);
        }
    }
    Segment::new(n_frames, d, values)
}
