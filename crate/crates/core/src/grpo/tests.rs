use proptest::prelude::*;

use super::*;
use crate::bench::sample_tasks;
use crate::critic::{CriticReport, DimensionScores, ProgrammaticCritic};
use crate::episode::WorldMemory;
use crate::microworld::DomainSpec;
use crate::numerics::{finite_diff_grad, Activation, NetParams, OptState, RandomSource};
use crate::planner::{BfsPlanner, PlanStep};
use crate::worldmodel::{
    init_velocity_net, sample_sde, transition_logprob_grad, ContextEncoding, DenoiseTrace, PolicyBundle, SamplerConfig,
    TraceStep,
};

fn tiny_net(rng: &mut RandomSource) -> NetParams {
    NetParams::init(&[7, 4, 4], Activation::Tanh, 1.0, rng).unwrap().with_skip(0.8).unwrap()
}

fn perturbed(net: &NetParams, scale: f64, rng: &mut RandomSource) -> NetParams {
    let mut out = net.clone();
    out.values_mut().iter_mut().for_each(|v| *v += scale * rng.normal());
    out
}

fn placeholder_report(scalar: f64) -> CriticReport {
    CriticReport {
        scores: DimensionScores([scalar; 5]),
        scalar,
        tags: Vec::new(),
        revised_instruction: String::new(),
        prose: String::new(),
        reasons: Default::default(),
        pre_held: true,
        post_satisfied: true,
        interaction_applicable: true,
        warnings: Vec::new(),
    }
}

/// A group sampled from `old` on the tiny net with the given rewards.
fn tiny_group(old: &NetParams, rewards: &[f64], sampler: &SamplerConfig, rng: &mut RandomSource) -> RolloutGroup {
    let cond = ContextEncoding { values: vec![rng.normal(), rng.normal()] };
    let z_k = rng.normal_vec(4);
    let members = rewards
        .iter()
        .map(|&r| {
            let (segment, trace) = sample_sde(old, &cond, &z_k, 2, sampler, &mut rng.fork()).unwrap();
            RolloutMember { segment, trace, report: placeholder_report(r), reward: r }
        })
        .collect();
    let advantages = compute_advantages(rewards, 1e-8).unwrap();
    RolloutGroup { z_k, cond, members, advantages }
}

#[test]
fn advantage_examples() {
    assert_eq!(compute_advantages(&[0.5; 8], 1e-8).unwrap(), vec![0.0; 8]);
    let a = compute_advantages(&[0.0, 1.0], 1e-8).unwrap();
    let expected = 0.5 / (0.5 + 1e-8);
    assert!((a[0] + expected).abs() < 1e-15 && (a[1] - expected).abs() < 1e-15);
    assert!(a[1] < 1.0 && a[1] > 0.99999997);
    assert!(compute_advantages(&[1.0], 1e-8).is_err());
}

proptest! {
    #[test]
    fn advantage_identities(rewards in prop::collection::vec(0.0f64..1.0, 2..32), spread in 0u32..4) {
        // spread shrinks the rewards toward a common value to probe tiny variances
        let scale = [1.0, 1e-3, 1e-6, 1e-9][spread as usize];
        let r: Vec<f64> = rewards.iter().map(|x| 0.5 + scale * (x - 0.5)).collect();
        let a = compute_advantages(&r, 1e-8).unwrap();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() <= 1e-12);
        let rm = r.iter().sum::<f64>() / n;
        let rstd = (r.iter().map(|x| (x - rm).powi(2)).sum::<f64>() / n).sqrt();
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!((std - rstd / (rstd + 1e-8)).abs() <= 1e-9);
        prop_assert!(std <= 1.0 + 1e-12);
        if rstd >= 1e-2 {
            prop_assert!((std - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn clip_semantics() {
    assert_eq!(surrogate_term(10.0, 1.0, 0.2), (1.2, true));
    assert_eq!(surrogate_term(10.0, -1.0, 0.2), (-10.0, false));
    assert_eq!(surrogate_term(0.5, -1.0, 0.2), (-0.8, true));
    assert_eq!(surrogate_term(0.5, 1.0, 0.2), (0.5, false));
    assert_eq!(surrogate_term(1.1, 2.0, 0.2), (2.2, false));
}

#[test]
fn curriculum_boundaries() {
    let c = Curriculum::thirds(300);
    assert_eq!(c.levels, vec![(1, 1), (101, 3), (201, 5)]);
    assert_eq!(curriculum_schedule(&c, 1).unwrap(), 1);
    assert_eq!(curriculum_schedule(&c, 100).unwrap(), 1);
    assert_eq!(curriculum_schedule(&c, 101).unwrap(), 3);
    assert_eq!(curriculum_schedule(&c, 201).unwrap(), 5);
    assert_eq!(curriculum_schedule(&c, 10_000).unwrap(), 5);
    assert!(curriculum_schedule(&c, 0).is_err());
    let levels: Vec<usize> = (1..=300).map(|i| curriculum_schedule(&c, i).unwrap()).collect();
    assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(Curriculum::parse(&c.render()).unwrap(), c);
    assert!(Curriculum::parse("2:1").is_err());
    assert!(Curriculum::parse("1:3,5:1").is_err());
    assert!(Curriculum::parse("1:x").is_err());
}

#[test]
fn kl_examples() {
    let mut rng = RandomSource::new(1, 0);
    let net = tiny_net(&mut rng);
    let sampler = SamplerConfig { k: 1, ..Default::default() };
    let cond = ContextEncoding { values: vec![0.2, -0.4] };
    let (_, trace) = sample_sde(&net, &cond, &rng.normal_vec(4), 2, &sampler, &mut rng).unwrap();
    assert_eq!(kl_term(&net, &net, &trace, &cond, &sampler).unwrap(), 0.0);
    // shift one output bias so the transition mean moves by one std in one coordinate
    let std = sampler.step_std(1.0);
    let jac = sampler.mean_jacobian(1.0);
    let mut shifted = net.clone();
    let n = shifted.len();
    // the skip gain is the last parameter; output biases sit just before it
    shifted.values_mut()[n - 1 - 4] += std / jac.abs();
    let kl = kl_term(&net, &shifted, &trace, &cond, &sampler).unwrap();
    assert!((kl - 0.5).abs() < 1e-9, "{kl}");
    let no_noise = SamplerConfig { eta_scale: 0.0, ..sampler };
    assert!(kl_term(&net, &shifted, &trace, &cond, &no_noise).is_err());
}

#[test]
fn kl_matches_monte_carlo_in_one_dimension() {
    let mut rng = RandomSource::new(2, 0);
    let theta = NetParams::init(&[4, 3, 1], Activation::Tanh, 1.0, &mut rng).unwrap().with_skip(1.0).unwrap();
    let reference = perturbed(&theta, 0.3, &mut rng);
    let sampler = SamplerConfig { k: 1, ..Default::default() };
    let cond = ContextEncoding { values: vec![0.3, 0.1] };
    let step = TraceStep { t: 1.0, z: vec![0.4], u: vec![0.0], mean: vec![0.0], std: 0.0, next: vec![0.0], logp: 0.0 };
    let trace = DenoiseTrace { steps: vec![step.clone()] };
    let kl = kl_term(&theta, &reference, &trace, &cond, &sampler).unwrap();
    let mean_of = |p: &NetParams| crate::worldmodel::mean_cached(p, &step, &cond, &sampler).unwrap().0[0];
    let (m1, m2, s) = (mean_of(&theta), mean_of(&reference), sampler.step_std(1.0));
    let n = 200_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let x = m1 + s * rng.normal();
        acc += ((x - m2).powi(2) - (x - m1).powi(2)) / (2.0 * s * s);
    }
    let mc = acc / n as f64;
    assert!(kl > 0.05, "offset too small to test: {kl}");
    assert!((mc / kl - 1.0).abs() < 0.05, "mc {mc} vs closed form {kl}");
}

#[test]
fn fixed_point_at_initialization() {
    let mut rng = RandomSource::new(3, 0);
    let net = tiny_net(&mut rng);
    let sampler = SamplerConfig::default();
    let config = GrpoConfig::default();
    let group = tiny_group(&net, &[0.1, 0.9, 0.4, 0.6], &sampler, &mut rng);
    let obj = grpo_objective(&net, &net, &net, &group, &sampler, &config).unwrap();
    assert!(obj.max_ratio_deviation <= 1e-12);
    assert_eq!(obj.clip_fraction, 0.0);
    assert_eq!(obj.kl, 0.0);
    assert!(obj.surrogate.abs() < 1e-12);
    // a non-degenerate group still carries a policy gradient
    assert!(obj.grads.iter().any(|g| g.abs() > 1e-6));

    // degenerate group: zero advantages and zero KL gradient, no movement
    let flat = tiny_group(&net, &[0.5; 4], &sampler, &mut rng);
    let mut bundle = PolicyBundle::from_sft(net.clone());
    let (obj, norm) = grpo_update(&mut bundle, &flat, &sampler, &config, &mut OptState::new(net.len())).unwrap();
    assert!(obj.grads.iter().all(|g| *g == 0.0));
    assert!(norm < 1e-12);
    assert_eq!(bundle.theta, net);
}

#[test]
fn degenerate_group_follows_the_kl_gradient_only() {
    let mut rng = RandomSource::new(4, 0);
    let reference = tiny_net(&mut rng);
    let theta = perturbed(&reference, 0.05, &mut rng);
    let sampler = SamplerConfig::default();
    let config = GrpoConfig { beta: 0.3, ..Default::default() };
    let group = tiny_group(&theta, &[0.5; 3], &sampler, &mut rng);
    let obj = grpo_objective(&theta, &theta, &reference, &group, &sampler, &config).unwrap();
    let kl = |p: &[f64]| {
        let n = NetParams::from_values_with_skip(theta.sizes(), Activation::Tanh, true, p.to_vec()).unwrap();
        let per: f64 = group.members.iter().map(|m| kl_term(&n, &reference, &m.trace, &group.cond, &sampler).unwrap()).sum();
        -config.beta * per / group.members.len() as f64
    };
    let fd = finite_diff_grad(kl, theta.values(), 1e-5).unwrap();
    for (a, b) in obj.grads.iter().zip(&fd) {
        assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    let mut rng = RandomSource::new(5, 0);
    let old = tiny_net(&mut rng);
    let reference = perturbed(&old, 0.02, &mut rng);
    let sampler = SamplerConfig::default();
    let config = GrpoConfig { epsilon: 0.2, beta: 0.05, ..Default::default() };
    let group = tiny_group(&old, &[0.2, 0.7, 0.9, 0.1, 0.5], &sampler, &mut rng);
    let theta = perturbed(&old, 0.002, &mut rng);
    let obj = grpo_objective(&theta, &old, &reference, &group, &sampler, &config).unwrap();
    assert!(obj.max_ratio_deviation > 0.0);
    let value = |p: &[f64]| {
        let n = NetParams::from_values_with_skip(theta.sizes(), Activation::Tanh, true, p.to_vec()).unwrap();
        grpo_objective(&n, &old, &reference, &group, &sampler, &config).unwrap().value
    };
    let fd = finite_diff_grad(value, theta.values(), 1e-6).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in obj.grads.iter().zip(&fd) {
        worst = worst.max((a - b).abs() / b.abs().max(1e-3));
    }
    assert!(worst < 1e-3, "max relative error {worst}");
}

#[test]
fn single_member_gradient_is_the_likelihood_gradient() {
    let mut rng = RandomSource::new(6, 0);
    let net = tiny_net(&mut rng);
    let sampler = SamplerConfig::default();
    let config = GrpoConfig { beta: 0.0, ..Default::default() };
    let mut group = tiny_group(&net, &[0.3, 0.8], &sampler, &mut rng);
    group.members.truncate(1);
    group.advantages = vec![1.0];
    let obj = grpo_objective(&net, &net, &net, &group, &sampler, &config).unwrap();
    let mut expected = vec![0.0; net.len()];
    let k = sampler.k as f64;
    for step in &group.members[0].trace.steps {
        transition_logprob_grad(&net, step, &group.cond, &sampler, 1.0 / k, &mut expected).unwrap();
    }
    for (a, b) in obj.grads.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
    }
    let trace_ll = |p: &[f64]| {
        let n = NetParams::from_values_with_skip(net.sizes(), Activation::Tanh, true, p.to_vec()).unwrap();
        group.members[0]
            .trace
            .steps
            .iter()
            .map(|s| crate::worldmodel::transition_logprob(&n, s, &group.cond, &sampler).unwrap())
            .sum::<f64>()
            / k
    };
    let fd = finite_diff_grad(trace_ll, net.values(), 1e-6).unwrap();
    for (a, b) in obj.grads.iter().zip(&fd) {
        assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-2), "{a} vs {b}");
    }
}

#[test]
fn rollouts_share_the_starting_noise() {
    let k = DomainSpec::kitchen();
    let mut rng = RandomSource::new(7, 0);
    let net = init_velocity_net(&k, &mut rng).unwrap();
    let step = PlanStep::from_operator(&k, 1, k.operator_index("open_jar").unwrap());
    let memory = WorldMemory::new(&k, k.initial.clone());
    let sampler = SamplerConfig::default();
    let config = GrpoConfig::default();
    let critic = ProgrammaticCritic::default();
    let group = rollout_group(&net, &k, &step, &memory, &sampler, &config, &critic, &mut rng).unwrap();
    assert_eq!(group.members.len(), 8);
    assert!(group.members.iter().all(|m| m.trace.initial() == group.z_k.as_slice()));
    assert_ne!(group.members[0].segment, group.members[1].segment);
    assert!(group.members.iter().all(|m| (0.0..=1.0).contains(&m.reward)));

    let stream = RandomSource::new(42, 0);
    let twins = rollout_with_streams(
        &net,
        &k,
        &step,
        group.cond.clone(),
        group.z_k.clone(),
        &sampler,
        &config,
        &critic,
        vec![stream.clone(), stream],
    )
    .unwrap();
    assert_eq!(twins.members[0].segment, twins.members[1].segment);
    assert_eq!(twins.members[0].reward, twins.members[1].reward);
    assert_eq!(twins.advantages, vec![0.0, 0.0]);

    let ode = SamplerConfig { eta_scale: 0.0, ..sampler };
    assert!(matches!(
        rollout_group(&net, &k, &step, &memory, &ode, &config, &critic, &mut rng),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn training_bookkeeping() {
    let k = DomainSpec::kitchen();
    let mut rng = RandomSource::new(8, 0);
    let net = init_velocity_net(&k, &mut rng).unwrap();
    let tasks = sample_tasks(&k, 20, 1, 5, &mut rng).unwrap();
    let critic = ProgrammaticCritic::default();
    let sampler = SamplerConfig::default();
    let zero = GrpoConfig { iterations: 0, ..Default::default() };
    let (bundle, log) =
        train(PolicyBundle::from_sft(net.clone()), &k, &BfsPlanner::default(), &critic, &tasks, &sampler, &zero, &mut rng)
            .unwrap();
    assert_eq!(bundle.theta, net);
    assert!(log.records.is_empty());

    let config = GrpoConfig {
        group_size: 2,
        iterations: 6,
        curriculum: Curriculum::parse("1:1,3:3,5:5").unwrap(),
        ..Default::default()
    };
    let (bundle, log) =
        train(PolicyBundle::from_sft(net.clone()), &k, &BfsPlanner::default(), &critic, &tasks, &sampler, &config, &mut rng)
            .unwrap();
    assert_ne!(bundle.theta, net);
    assert_eq!(bundle.reference, net);
    let levels: Vec<usize> = log.records.iter().map(|r| r.curriculum_level).collect();
    assert_eq!(levels, [1, 1, 3, 3, 5, 5]);
    for r in &log.records {
        assert!(r.plan_len <= r.curriculum_level);
        assert!((0.0..=1.0).contains(&r.clip_fraction));
        assert!(r.kl_mean >= 0.0);
    }
    // the first update after a sync sees ratio 1 everywhere
    assert_eq!(log.records[0].clip_fraction, 0.0);
    assert_eq!(log.to_csv().lines().count(), 7);
    assert!(log.to_csv().starts_with("iteration,mean_reward,adherence_mean,coherence_mean,kl_mean,clip_fraction,curriculum_level"));
}

#[test]
fn moving_average_windows() {
    assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
    assert!(moving_average(&[1.0], 2).is_empty());
}
