use super::evaluate::{evaluate, measure, CriticConfig};
use crate::microworld::{decode_frame, reachable_applications, reference_segment, DomainSpec, Segment, DECODE_THRESHOLD};
use crate::numerics::{opt_step, Activation, NetParams, OptState, RandomSource};
use crate::planner::PlanStep;
use crate::{Error, Result};

/// Bradley-Terry loss `−ln σ(r_w − r_l)`, evaluated without overflow.
pub fn bt_loss(r_w: f64, r_l: f64) -> f64 {
    let x = r_w - r_l;
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// `(∂/∂r_w, ∂/∂r_l)` of [`bt_loss`].
pub fn bt_loss_grad(r_w: f64, r_l: f64) -> (f64, f64) {
    let x = r_w - r_l;
    // σ(−x)
    let s = if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    };
    (-s, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSource {
    /// Two attempts at the same step ranked by the critic.
    QualityRanking,
    /// A correct execution against one of a different step.
    SemanticNegative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub winner: Vec<f64>,
    pub loser: Vec<f64>,
    pub source: PairSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModelParams {
    pub net: NetParams,
}

impl RewardModelParams {
    /// All-zero model of the given architecture; scores every input 0.
    pub fn zeros(feature_width: usize, hidden: &[usize]) -> Result<Self> {
        Ok(Self { net: NetParams::zeros(&layer_sizes(feature_width, hidden), Activation::Tanh)? })
    }

    pub fn feature_width(&self) -> usize {
        self.net.input_width()
    }
}

fn layer_sizes(feature_width: usize, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![feature_width];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

/// Width of [`segment_features`] for a domain.
pub fn feature_width(spec: &DomainSpec) -> usize {
    spec.predicates.len() + 3 + 5
}

/// Fixed feature vector of a segment judged against a step:
/// per predicate, +1 / −1 when it is a post literal that is met / unmet at
/// the final frame and 0 otherwise; then mean squared second difference,
/// mean actor-target gap in the contact window (0 without a target), the
/// largest per-frame jump, and the five critic scores.
pub fn segment_features(spec: &DomainSpec, segment: &Segment, step: &PlanStep) -> Result<Vec<f64>> {
    let m = measure(spec, segment, step)?;
    let last = decode_frame(spec, segment.last_frame(), DECODE_THRESHOLD);
    let mut f = vec![0.0; spec.predicates.len()];
    for l in &step.post {
        f[l.predicate] = if last.holds(*l) { 1.0 } else { -1.0 };
    }
    f.push(m.mean_sq_second_diff);
    f.push(m.contact.map_or(0.0, |(_, gap)| gap));
    f.push(m.max_delta);
    f.extend_from_slice(&m.scores().0);
    Ok(f)
}

pub fn rm_score(params: &RewardModelParams, features: &[f64]) -> Result<f64> {
    if features.len() != params.feature_width() {
        return Err(Error::Shape(format!(
            "reward model expects {} features, got {}",
            params.feature_width(),
            features.len()
        )));
    }
    Ok(params.net.forward(features)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmTrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    /// Share of pairs held out for the accuracy estimate.
    pub holdout_fraction: f64,
}

impl Default for RmTrainConfig {
    fn default() -> Self {
        Self { hidden: vec![16], epochs: 200, lr: 0.01, holdout_fraction: 0.2 }
    }
}

#[derive(Debug, Clone)]
pub struct RmTrainReport {
    pub params: RewardModelParams,
    /// Mean training loss before each epoch's update.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    /// `None` when nothing was held out.
    pub holdout_accuracy: Option<f64>,
}

/// Fraction of pairs ranked correctly; ties count as half.
pub fn pairwise_accuracy(params: &RewardModelParams, pairs: &[PreferencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.5);
    }
    let mut correct = 0.0;
    for p in pairs {
        let (w, l) = (rm_score(params, &p.winner)?, rm_score(params, &p.loser)?);
        correct += if w > l {
            1.0
        } else if w == l {
            0.5
        } else {
            0.0
        };
    }
    Ok(correct / pairs.len() as f64)
}

fn mean_loss_and_grad(params: &RewardModelParams, pairs: &[PreferencePair], grads: &mut [f64]) -> Result<f64> {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    for p in pairs {
        let cw = params.net.forward_cached(&p.winner)?;
        let cl = params.net.forward_cached(&p.loser)?;
        let (rw, rl) = (cw.output()[0], cl.output()[0]);
        loss += bt_loss(rw, rl) * scale;
        let (gw, gl) = bt_loss_grad(rw, rl);
        params.net.backward_into(&cw, &[gw], scale, grads)?;
        params.net.backward_into(&cl, &[gl], scale, grads)?;
    }
    Ok(loss)
}

/// Full-batch Adam on the mean Bradley-Terry loss.
///
/// The output layer starts at zero, so an untrained model ties every pair.
/// A `holdout_fraction` share of the pairs (chosen with `rng`) is kept out
/// of training and used for the reported accuracy.
pub fn rm_train(pairs: &[PreferencePair], config: &RmTrainConfig, rng: &mut RandomSource) -> Result<RmTrainReport> {
    let first = pairs.first().ok_or_else(|| Error::InvalidArgument("no preference pairs".into()))?;
    let width = first.winner.len();
    if pairs.iter().any(|p| p.winner.len() != width || p.loser.len() != width) {
        return Err(Error::Shape("preference pairs have unequal feature widths".into()));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(Error::Config(format!("holdout fraction {} outside [0, 1)", config.holdout_fraction)));
    }
    let net = NetParams::init(&layer_sizes(width, &config.hidden), Activation::Tanh, 0.0, rng)?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    rng.shuffle(&mut order);
    let n_hold = (pairs.len() as f64 * config.holdout_fraction).round() as usize;
    let n_hold = n_hold.min(pairs.len() - 1);
    let holdout: Vec<PreferencePair> = order[..n_hold].iter().map(|&i| pairs[i].clone()).collect();
    let train: Vec<PreferencePair> = order[n_hold..].iter().map(|&i| pairs[i].clone()).collect();

    let mut params = RewardModelParams { net };
    let mut state = OptState::new(params.net.len());
    let mut grads = vec![0.0; params.net.len()];
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let loss = mean_loss_and_grad(&params, &train, &mut grads)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("reward model loss non-finite at epoch {epoch}")));
        }
        epoch_losses.push(loss);
        opt_step(params.net.values_mut(), &grads, &mut state, config.lr)?;
    }
    let train_accuracy = pairwise_accuracy(&params, &train)?;
    let holdout_accuracy = if holdout.is_empty() { None } else { Some(pairwise_accuracy(&params, &holdout)?) };
    if let (Some(last), Some(acc)) = (epoch_losses.last(), holdout_accuracy) {
        log::info!("reward model: loss {last:.4}, held-out accuracy {acc:.3}");
    }
    Ok(RmTrainReport { params, epoch_losses, train_accuracy, holdout_accuracy })
}

/// Pairs whose winner exceeds the loser by at least `margin` in every
/// coordinate; linearly separable by construction.
pub fn synthetic_pairs(n: usize, width: usize, margin: f64, rng: &mut RandomSource) -> Vec<PreferencePair> {
    (0..n)
        .map(|_| {
            let loser: Vec<f64> = (0..width).map(|_| rng.uniform()).collect();
            let winner = loser.iter().map(|x| x + margin + 0.5 * rng.uniform()).collect();
            PreferencePair { winner, loser, source: PairSource::QualityRanking }
        })
        .collect()
}

/// Preference pairs from the domain's own demonstrations.
///
/// Quality-ranking pairs set a demonstration against a degraded copy
/// (blended toward its first frame and perturbed), ordered by the critic
/// scalar. Semantic-negative pairs set a demonstration of the step against
/// a demonstration of a different operator from the same state, both
/// judged against the step.
pub fn build_preference_pairs(spec: &DomainSpec, n: usize, rng: &mut RandomSource) -> Result<Vec<PreferencePair>> {
    let apps = reachable_applications(spec);
    if apps.is_empty() {
        return Err(Error::InvalidArgument("domain has no applicable operators".into()));
    }
    let config = CriticConfig::default();
    let mut pairs = Vec::with_capacity(n);
    let mut attempts = 0;
    while pairs.len() < n {
        attempts += 1;
        if attempts > 20 * n + 100 {
            return Err(Error::InvalidArgument("could not build enough distinct preference pairs".into()));
        }
        let (state, op) = &apps[rng.below(apps.len())];
        let step = PlanStep::from_operator(spec, 1, *op);
        let good = reference_segment(spec, state, *op, spec.frames, 0.01, rng)?;
        let semantic = pairs.len() % 2 == 1;
        let other = if semantic {
            let others: Vec<_> = apps.iter().filter(|(s, o)| s == state && o != op).collect();
            if others.is_empty() {
                continue;
            }
            let (s, o) = others[rng.below(others.len())];
            reference_segment(spec, s, *o, spec.frames, 0.01, rng)?
        } else {
            let blend = rng.uniform_range(0.3, 1.0);
            let noise = rng.uniform_range(0.0, 0.08);
            let first = good.first_frame().to_vec();
            let mut bad = good.clone();
            for f in 0..bad.n_frames() {
                for (c, v) in bad.frame_mut(f).iter_mut().enumerate() {
                    *v = (1.0 - blend) * *v + blend * first[c] + noise * rng.normal();
                }
            }
            bad
        };
        let (rg, ro) = (evaluate(spec, &good, &step, &config)?.scalar, evaluate(spec, &other, &step, &config)?.scalar);
        if rg == ro {
            continue;
        }
        let (fg, fo) = (segment_features(spec, &good, &step)?, segment_features(spec, &other, &step)?);
        let (winner, loser) = if rg > ro { (fg, fo) } else { (fo, fg) };
        let source = if semantic { PairSource::SemanticNegative } else { PairSource::QualityRanking };
        pairs.push(PreferencePair { winner, loser, source });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;

    #[test]
    fn bt_loss_values() {
        assert_eq!(bt_loss(0.3, 0.3), std::f64::consts::LN_2);
        assert_eq!(bt_loss(-7.0, -7.0), std::f64::consts::LN_2);
        // −ln σ(10) = ln(1 + e^−10)
        let expected = (1.0 + (-10.0f64).exp()).ln();
        assert!((bt_loss(10.0, 0.0) - expected).abs() < 1e-15);
        assert!((bt_loss(10.0, 0.0) - 4.54e-5).abs() < 1e-7);
        assert!(bt_loss(-800.0, 0.0).is_finite());
    }

    #[test]
    fn bt_loss_symmetric_sum_bound() {
        let mut rng = RandomSource::new(5, 0);
        for _ in 0..1000 {
            let (a, b) = (rng.uniform_range(-5.0, 5.0), rng.uniform_range(-5.0, 5.0));
            assert!(bt_loss(a, b) + bt_loss(b, a) >= 2.0 * std::f64::consts::LN_2);
            assert!(bt_loss(a, b) > 0.0);
        }
        assert_eq!(bt_loss(1.0, 1.0) + bt_loss(1.0, 1.0), 2.0 * std::f64::consts::LN_2);
        // strictly decreasing in the margin
        let xs: Vec<f64> = (-20..=20).map(|i| bt_loss(i as f64 * 0.5, 0.0)).collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bt_grad_matches_finite_differences() {
        for &(a, b) in &[(0.0, 0.0), (1.5, -0.3), (-2.0, 4.0), (8.0, 1.0)] {
            let (gw, gl) = bt_loss_grad(a, b);
            let fd = finite_diff_grad(|p: &[f64]| bt_loss(p[0], p[1]), &[a, b], 1e-5).unwrap();
            assert!((gw - fd[0]).abs() <= 1e-4 * fd[0].abs().max(1e-8), "{gw} {}", fd[0]);
            assert!((gl - fd[1]).abs() <= 1e-4 * fd[1].abs().max(1e-8));
        }
    }

    #[test]
    fn separable_pairs_are_learned() {
        let mut rng = RandomSource::new(11, 0);
        let pairs = synthetic_pairs(500, 6, 0.05, &mut rng);
        let report = rm_train(&pairs, &RmTrainConfig::default(), &mut rng).unwrap();
        assert!(report.holdout_accuracy.unwrap() >= 0.9, "{:?}", report.holdout_accuracy);
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    }

    #[test]
    fn zero_epochs_is_chance() {
        let mut rng = RandomSource::new(11, 0);
        let pairs = synthetic_pairs(200, 6, 0.05, &mut rng);
        let cfg = RmTrainConfig { epochs: 0, ..Default::default() };
        let report = rm_train(&pairs, &cfg, &mut rng).unwrap();
        assert!((report.holdout_accuracy.unwrap() - 0.5).abs() <= 0.1);
    }

    #[test]
    fn duplicated_pairs_reach_the_same_optimum() {
        let mut rng = RandomSource::new(12, 0);
        let pairs = synthetic_pairs(100, 4, 0.05, &mut rng);
        let test = synthetic_pairs(200, 4, 0.05, &mut rng);
        let doubled: Vec<_> = pairs.iter().chain(pairs.iter()).cloned().collect();
        let cfg = RmTrainConfig { holdout_fraction: 0.0, epochs: 100, ..Default::default() };
        let a = rm_train(&pairs, &cfg, &mut RandomSource::new(1, 1)).unwrap();
        let b = rm_train(&doubled, &cfg, &mut RandomSource::new(1, 1)).unwrap();
        for (x, y) in a.epoch_losses.iter().zip(&b.epoch_losses) {
            assert!((x - y).abs() < 1e-9, "{x} {y}");
        }
        assert_eq!(pairwise_accuracy(&a.params, &test).unwrap(), pairwise_accuracy(&b.params, &test).unwrap());
    }

    #[test]
    fn zero_model_scores_zero() {
        let m = RewardModelParams::zeros(5, &[4]).unwrap();
        assert_eq!(rm_score(&m, &[0.3, 0.1, 2.0, -1.0, 0.0]).unwrap(), 0.0);
        assert!(rm_score(&m, &[0.0; 4]).is_err());
    }

    #[test]
    fn domain_pairs_train() {
        let k = DomainSpec::kitchen();
        let mut rng = RandomSource::new(2, 0);
        let pairs = build_preference_pairs(&k, 200, &mut rng).unwrap();
        assert!(pairs.iter().all(|p| p.winner.len() == feature_width(&k)));
        assert!(pairs.iter().any(|p| p.source == PairSource::SemanticNegative));
        let report = rm_train(&pairs, &RmTrainConfig::default(), &mut rng).unwrap();
        assert!(report.holdout_accuracy.unwrap() >= 0.9, "{:?}", report.holdout_accuracy);
    }
}
