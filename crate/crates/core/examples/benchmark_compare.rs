//! Difficulty-stratified suite, three policies, one comparison table: the
//! demonstration oracle, a generator that never moves, and a supervised
//! generator in each loop setting.
//!
//! cargo run --release --example benchmark_compare

use closedloop::bench::{compare, evaluate_policy, generate_suite};
use closedloop::critic::ProgrammaticCritic;
use closedloop::episode::{LoopConfig, LoopMode};
use closedloop::microworld::DomainSpec;
use closedloop::numerics::RandomSource;
use closedloop::planner::BfsPlanner;
use closedloop::worldmodel::{
    demonstrations, init_velocity_net, sft_train, DemoConfig, FrozenPolicy, LearnedPolicy, OraclePolicy, SamplerConfig,
    SegmentPolicy, SftConfig,
};

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let suite = generate_suite(&k, 7, [10, 10, 5])?;
    println!("suite seed 7: {:?} simple/medium/hard tasks", suite.counts());

    let mut rng = RandomSource::new(0, 0);
    let data = demonstrations(&k, 200, &DemoConfig::default(), &mut rng)?;
    let net = init_velocity_net(&k, &mut rng)?;
    let sft = LearnedPolicy { params: sft_train(&net, &data, &SftConfig::default(), &mut rng)?.params, sampler: SamplerConfig::default() };
    let oracle = OraclePolicy { jitter: 0.01 };

    let runs: [(&str, &dyn SegmentPolicy, LoopMode); 5] = [
        ("oracle", &oracle, LoopMode::Full),
        ("frozen", &FrozenPolicy, LoopMode::Full),
        ("sft-open-loop", &sft, LoopMode::OpenLoop),
        ("sft-inner-only", &sft, LoopMode::InnerOnly),
        ("sft-full", &sft, LoopMode::Full),
    ];
    let mut reports = Vec::new();
    for (name, policy, mode) in runs {
        let config = LoopConfig::for_mode(mode);
        let report = evaluate_policy(name, &k, policy, &suite, &BfsPlanner::default(), &ProgrammaticCritic::default(), &config, &mut RandomSource::new(7, 1))?;
        reports.push((name.to_string(), report));
    }
    print!("{}", compare(&reports)?.to_text());
    Ok(())
}
