use super::condition::{encode_condition, quoted_literals, ContextEncoding};
use super::sampler::{output_gain, velocity_cached};
use crate::microworld::{apply_operator, reference_segment, DomainSpec, OperatorId, Segment, SymbolicState, MAX_REFERENCE_JITTER};
use crate::numerics::{opt_step, Activation, NetParams, OptState, RandomSource};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Hidden layer widths of the velocity network.
pub const HIDDEN_LAYERS: [usize; 3] = [64, 64, 64];

/// Layer sizes for a domain: input `F*d + 1 + c`, output `F*d`.
pub fn velocity_net_sizes(spec: &DomainSpec) -> Vec<usize> {
    let fd = spec.frames * spec.width();
    let mut sizes = vec![fd + 1 + ContextEncoding::width_for(spec)];
    sizes.extend_from_slice(&HIDDEN_LAYERS);
    sizes.push(fd);
    sizes
}

/// Freshly initialized velocity network: small output layer and a skip
/// gain of 1, so that `u` starts near `z / t`.
pub fn init_velocity_net(spec: &DomainSpec, rng: &mut RandomSource) -> Result<NetParams> {
    NetParams::init(&velocity_net_sizes(spec), Activation::Tanh, 0.1, rng)?.with_skip(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftExample {
    pub cond: ContextEncoding,
    pub target: Segment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    /// Interior-frame jitter of the demonstrations.
    pub jitter: f64,
    /// Std of Gaussian noise added to the conditioning frame, so the policy
    /// tolerates imperfect previous segments.
    pub cond_noise: f64,
    /// Probability that a demonstration carries an emphasis mask.
    pub emphasis_prob: f64,
    /// Longest random operator prefix walked before the demonstrated step.
    pub max_prefix: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self { jitter: 0.01, cond_noise: 0.02, emphasis_prob: 0.5, max_prefix: 8 }
    }
}

fn applicable(spec: &DomainSpec, state: &SymbolicState) -> Vec<OperatorId> {
    (0..spec.operators.len()).map(OperatorId).filter(|&op| apply_operator(spec, state, op).is_ok()).collect()
}

/// Random walks per operator before it counts as out of reach.
const WALKS_PER_OPERATOR: usize = 256;

/// Demonstration dataset. Each example picks an operator uniformly, walks
/// random applicable prefixes from the initial state until one passes a
/// state where that operator applies, and records its reference segment with
/// the condition at a uniformly chosen such state. Drawing the operator first
/// keeps steps that need long prefixes, such as stirring, from being rare.
/// Operators no walk of at most `max_prefix` steps reaches are dropped.
pub fn demonstrations(spec: &DomainSpec, n: usize, config: &DemoConfig, rng: &mut RandomSource) -> Result<Vec<SftExample>> {
    if config.jitter > MAX_REFERENCE_JITTER {
        return Err(Error::Config(format!("jitter {} above {MAX_REFERENCE_JITTER}", config.jitter)));
    }
    if applicable(spec, &spec.initial).is_empty() {
        return Err(Error::InvalidArgument(format!("no operator applies in the initial state of '{}'", spec.name)));
    }
    let mut pool: Vec<OperatorId> = (0..spec.operators.len()).map(OperatorId).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let pick = rng.below(pool.len());
        let op = pool[pick];
        let Some((state, walked)) = (0..WALKS_PER_OPERATOR).find_map(|_| walk_to(spec, op, config.max_prefix, rng)) else {
            pool.swap_remove(pick);
            continue;
        };
        let step = PlanStep::from_operator(spec, 1, op);
        let target = reference_segment(spec, &state, op, spec.frames, config.jitter, rng)?;
        let frame: Vec<f64> = target.first_frame().iter().map(|v| v + config.cond_noise * rng.normal()).collect();
        let mut cond = encode_condition(spec, &step, &frame, walked)?;
        if rng.uniform() < config.emphasis_prob {
            let op = spec.operator(op);
            let lits: Vec<_> = op.post.iter().chain(&op.pre).copied().collect();
            let chosen: Vec<_> = lits.iter().copied().filter(|_| rng.uniform() < 0.5).collect();
            cond = cond.with_emphasis(spec, &chosen);
        }
        debug_assert!(quoted_literals(spec, &step.instruction).is_empty());
        out.push(SftExample { cond, target });
    }
    Ok(out)
}

/// One random walk of up to `max_prefix` steps; a uniformly chosen state on
/// it where `op` applies, with its depth.
fn walk_to(spec: &DomainSpec, op: OperatorId, max_prefix: usize, rng: &mut RandomSource) -> Option<(SymbolicState, usize)> {
    let mut state = spec.initial.clone();
    let mut hits = Vec::new();
    let len = rng.below(max_prefix + 1);
    for depth in 0..=len {
        if apply_operator(spec, &state, op).is_ok() {
            hits.push((state.clone(), depth));
        }
        let ops = applicable(spec, &state);
        if depth == len || ops.is_empty() {
            break;
        }
        state = apply_operator(spec, &state, ops[rng.below(ops.len())]).expect("operator applies");
    }
    if hits.is_empty() {
        None
    } else {
        let i = rng.below(hits.len());
        Some(hits.swap_remove(i))
    }
}

/// Mean over entries of `(u_theta(z_t, t, cond) - (eps - x))^2` with
/// `z_t = (1 - t) x + t eps`.
pub fn flow_matching_loss(theta: &NetParams, cond: &ContextEncoding, x: &[f64], eps: &[f64], t: f64) -> Result<f64> {
    flow_matching_loss_grad(theta, cond, x, eps, t, 0.0, &mut [])
}

/// Loss as above; accumulates `scale * d loss / d theta` into `grads`
/// unless `scale` is 0.
pub fn flow_matching_loss_grad(
    theta: &NetParams,
    cond: &ContextEncoding,
    x: &[f64],
    eps: &[f64],
    t: f64,
    scale: f64,
    grads: &mut [f64],
) -> Result<f64> {
    if x.len() != eps.len() {
        return Err(Error::Shape(format!("{} vs {}", x.len(), eps.len())));
    }
    let z: Vec<f64> = x.iter().zip(eps).map(|(xi, ei)| (1.0 - t) * xi + t * ei).collect();
    let (u, cache) = velocity_cached(theta, &z, t, cond)?;
    let n = x.len() as f64;
    let resid: Vec<f64> = u.iter().zip(x.iter().zip(eps)).map(|(u, (xi, ei))| u - (ei - xi)).collect();
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / n;
    if scale != 0.0 {
        let gain = output_gain(t);
        let out_grad: Vec<f64> = resid.iter().map(|r| 2.0 * r / n * gain).collect();
        theta.backward_into(&cache, &out_grad, scale, grads)?;
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SftConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self { epochs: 50, lr: 1e-3, batch_size: 32 }
    }
}

#[derive(Debug, Clone)]
pub struct SftReport {
    pub params: NetParams,
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch Adam on the flow-matching loss with `t = 1 - U[0, 1)` so that
/// `t` lies in (0, 1].
pub fn sft_train(theta: &NetParams, dataset: &[SftExample], config: &SftConfig, rng: &mut RandomSource) -> Result<SftReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty demonstration set".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut params = theta.clone();
    let mut state = OptState::new(params.len());
    let mut grads = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                let ex = &dataset[i];
                let t = 1.0 - rng.uniform();
                let eps = rng.normal_vec(ex.target.values().len());
                loss += scale * flow_matching_loss_grad(&params, &ex.cond, ex.target.values(), &eps, t, scale, &mut grads)?;
            }
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("flow-matching loss non-finite in epoch {epoch}")));
            }
            opt_step(params.values_mut(), &grads, &mut state, config.lr)?;
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        log::debug!("sft epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }
    Ok(SftReport { params, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;
    use crate::worldmodel::sample_ode;
    use crate::worldmodel::SamplerConfig;

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = RandomSource::new(1, 0);
        let net = NetParams::init(&[6, 4, 3], Activation::Tanh, 1.0, &mut rng).unwrap().with_skip(0.5).unwrap();
        assert!((40..=60).contains(&net.len()));
        let cond = ContextEncoding { values: vec![0.4, -0.1] };
        let x = [0.2, 0.9, 0.5];
        for t in [1.0, 0.6, 0.02] {
            let eps = rng.normal_vec(3);
            let mut grads = vec![0.0; net.len()];
            flow_matching_loss_grad(&net, &cond, &x, &eps, t, 1.0, &mut grads).unwrap();
            let f = |p: &[f64]| {
                let n = NetParams::from_values_with_skip(net.sizes(), Activation::Tanh, true, p.to_vec()).unwrap();
                flow_matching_loss(&n, &cond, &x, &eps, t).unwrap()
            };
            let fd = finite_diff_grad(f, net.values(), 1e-5).unwrap();
            for (a, b) in grads.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-4), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_epochs_leave_params_unchanged() {
        let k = DomainSpec::kitchen();
        let mut rng = RandomSource::new(2, 0);
        let data = demonstrations(&k, 4, &DemoConfig::default(), &mut rng).unwrap();
        let net = init_velocity_net(&k, &mut rng).unwrap();
        let report = sft_train(&net, &data, &SftConfig { epochs: 0, ..Default::default() }, &mut rng).unwrap();
        assert_eq!(report.params, net);
        assert!(report.epoch_losses.is_empty());
        assert!(sft_train(&net, &[], &SftConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn loss_halves_on_kitchen_demonstrations() {
        let k = DomainSpec::kitchen();
        let mut rng = RandomSource::new(3, 0);
        let data = demonstrations(&k, 200, &DemoConfig::default(), &mut rng).unwrap();
        let net = init_velocity_net(&k, &mut rng).unwrap();
        let report = sft_train(&net, &data, &SftConfig::default(), &mut rng).unwrap();
        let l = &report.epoch_losses;
        assert_eq!(l.len(), 50);
        assert!(l[49] < 0.5 * l[0], "{} vs {}", l[49], l[0]);
    }

    #[test]
    fn overfits_a_single_demonstration() {
        let k = DomainSpec::kitchen();
        let mut rng = RandomSource::new(4, 0);
        let data = demonstrations(&k, 1, &DemoConfig { cond_noise: 0.0, ..Default::default() }, &mut rng).unwrap();
        let net = init_velocity_net(&k, &mut rng).unwrap();
        let cfg = SftConfig { epochs: 8000, lr: 3e-4, batch_size: 1 };
        let report = sft_train(&net, &data, &cfg, &mut rng).unwrap();
        let target = data[0].target.values();
        for _ in 0..5 {
            let z_k = rng.normal_vec(target.len());
            let seg = sample_ode(&report.params, &data[0].cond, &z_k, k.frames, &SamplerConfig::default()).unwrap();
            let err = seg.values().iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 0.1, "L-inf error {err}");
        }
    }

    #[test]
    fn demonstrations_are_valid() {
        let w = DomainSpec::workshop();
        let mut rng = RandomSource::new(5, 0);
        let data = demonstrations(&w, 50, &DemoConfig::default(), &mut rng).unwrap();
        for ex in &data {
            assert_eq!(ex.cond.values.len(), ContextEncoding::width_for(&w));
            assert_eq!(ex.target.n_frames(), w.frames);
            assert!(ex.target.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn every_operator_is_demonstrated() {
        let k = DomainSpec::kitchen();
        let data = demonstrations(&k, 400, &DemoConfig::default(), &mut RandomSource::new(2, 0)).unwrap();
        let d = k.width();
        let mut counts = vec![0; k.operators.len()];
        for ex in &data {
            counts[ex.cond.values[d..d + k.operators.len()].iter().position(|&v| v == 1.0).unwrap()] += 1;
        }
        // uniform share is 50; a binomial 4-sigma band is about +-28
        assert!(counts.iter().all(|&c| c >= 22), "{counts:?}");
    }

    #[test]
    fn out_of_reach_operators_are_skipped() {
        let k = DomainSpec::kitchen();
        // stirring needs six steps first
        let config = DemoConfig { max_prefix: 2, ..DemoConfig::default() };
        let data = demonstrations(&k, 60, &config, &mut RandomSource::new(3, 0)).unwrap();
        let stir = k.operator_index("stir_tea").unwrap().0;
        assert!(data.iter().all(|ex| ex.cond.values[k.width() + stir] == 0.0));
    }
}
