//! One goal, three loop settings: open loop, inner regeneration only, and
//! inner regeneration plus replanning, all with the same learned generator.
//!
//! cargo run --release --example closed_loop_episode

use closedloop::critic::ProgrammaticCritic;
use closedloop::episode::{run_episode, LoopConfig, LoopMode};
use closedloop::microworld::DomainSpec;
use closedloop::numerics::RandomSource;
use closedloop::planner::{BfsPlanner, Goal};
use closedloop::worldmodel::{demonstrations, init_velocity_net, sft_train, DemoConfig, LearnedPolicy, SamplerConfig, SftConfig};

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let mut rng = RandomSource::new(0, 0);
    let data = demonstrations(&k, 200, &DemoConfig::default(), &mut rng)?;
    let net = init_velocity_net(&k, &mut rng)?;
    let params = sft_train(&net, &data, &SftConfig::default(), &mut rng)?.params;
    let policy = LearnedPolicy { params, sampler: SamplerConfig::default() };
    let goal = Goal::parse(&k, "cup.full, cup.stirred")?;
    println!("goal: {}", goal.description);

    let mut last = None;
    for mode in [LoopMode::OpenLoop, LoopMode::InnerOnly, LoopMode::Full] {
        let mut totals = (0.0, 0, 0, 0);
        for seed in 0..20 {
            let log = run_episode(&k, &goal, &BfsPlanner::default(), &policy, &ProgrammaticCritic::default(), &LoopConfig::for_mode(mode), &mut RandomSource::new(seed, 9))?;
            totals.0 += log.completeness() / 20.0;
            totals.1 += usize::from(log.status.name() == "success");
            totals.2 += log.segments_generated;
            totals.3 += log.replans.len();
            last = Some(log);
        }
        println!(
            "{:<10} completeness {:.3}, successes {}/20, segments {}, replans {}",
            mode.name(),
            totals.0,
            totals.1,
            totals.2,
            totals.3
        );
    }

    let log = last.expect("episodes ran");
    println!("\nlast full-loop episode, first records of its JSON lines log:");
    for line in log.to_jsonl(&k).lines().take(3) {
        println!("  {}", &line[..line.len().min(160)]);
    }
    Ok(())
}
