//! Trains a small rectified-flow generator on demonstrations, then samples
//! one step with the deterministic ODE and the stochastic SDE sampler.
//!
//! cargo run --release --example sample_world_model

use closedloop::critic::{evaluate, CriticConfig};
use closedloop::episode::WorldMemory;
use closedloop::microworld::DomainSpec;
use closedloop::numerics::RandomSource;
use closedloop::planner::{BfsPlanner, Goal, Planner};
use closedloop::worldmodel::{
    demonstrations, embed_condition, init_velocity_net, sample_ode, sample_sde, sft_train, DemoConfig, SamplerConfig,
    SftConfig,
};

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let mut rng = RandomSource::new(0, 0);
    let data = demonstrations(&k, 200, &DemoConfig::default(), &mut rng)?;
    let net = init_velocity_net(&k, &mut rng)?;
    let report = sft_train(&net, &data, &SftConfig { epochs: 30, ..SftConfig::default() }, &mut rng)?;
    let losses = &report.epoch_losses;
    println!("flow-matching loss {:.4} -> {:.4} over {} epochs", losses[0], losses[losses.len() - 1], losses.len());

    let step = BfsPlanner::default().plan(&k, &Goal::parse(&k, "jar.lid_removed")?, &k.initial)?.steps.remove(0);
    let cond = embed_condition(&k, &step, &WorldMemory::new(&k, k.initial.clone()))?;
    let sampler = SamplerConfig::default();
    let z = rng.normal_vec(k.frames * k.width());
    let critic = CriticConfig::default();

    let ode = sample_ode(&report.params, &cond, &z, k.frames, &sampler)?;
    let r = evaluate(&k, &ode, &step, &critic)?;
    println!("ode  '{}': reward {:.3}, post satisfied {}", step.instruction, r.scalar, r.post_satisfied);

    // same starting noise, fresh per-step noise each draw
    for i in 0..3 {
        let (seg, trace) = sample_sde(&report.params, &cond, &z, k.frames, &sampler, &mut rng)?;
        let r = evaluate(&k, &seg, &step, &critic)?;
        let logp: f64 = trace.steps.iter().map(|s| s.logp).sum();
        println!("sde #{i}: reward {:.3}, post satisfied {}, log-likelihood {logp:.1}", r.scalar, r.post_satisfied);
    }
    Ok(())
}
