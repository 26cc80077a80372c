//! Short GRPO run from a supervised checkpoint: shared-noise groups scored
//! by the critic, clipped per-step ratios, KL to the reference. Writes the
//! training curves as CSV and SVG.
//!
//! cargo run --release --example grpo_training [out_dir]

use std::path::PathBuf;

use closedloop::bench::{emit_curves, sample_tasks};
use closedloop::critic::ProgrammaticCritic;
use closedloop::grpo::{train, Curriculum, GrpoConfig};
use closedloop::microworld::DomainSpec;
use closedloop::numerics::RandomSource;
use closedloop::planner::BfsPlanner;
use closedloop::worldmodel::{demonstrations, init_velocity_net, sft_train, DemoConfig, PolicyBundle, SamplerConfig, SftConfig};

fn main() -> closedloop::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("closedloop-grpo"), PathBuf::from);
    let k = DomainSpec::kitchen();
    let mut rng = RandomSource::new(0, 0);
    let data = demonstrations(&k, 200, &DemoConfig::default(), &mut rng)?;
    let net = init_velocity_net(&k, &mut rng)?;
    let sft = sft_train(&net, &data, &SftConfig::default(), &mut rng)?.params;

    let tasks = sample_tasks(&k, 100, 1, 3, &mut RandomSource::new(11, 0))?;
    let config = GrpoConfig { group_size: 16, lr: 1e-4, iterations: 30, curriculum: Curriculum::parse("1:1,16:3")?, ..GrpoConfig::default() };
    let (_, log) = train(
        PolicyBundle::from_sft(sft),
        &k,
        &BfsPlanner::default(),
        &ProgrammaticCritic::default(),
        &tasks,
        &SamplerConfig::default(),
        &config,
        &mut RandomSource::new(5, 0),
    )?;
    for r in log.records.iter().step_by(5) {
        println!(
            "iter {:>3}  len<={}  reward {:.3}  kl {:.2e}  clipped {:.3}  {}",
            r.iteration, r.curriculum_level, r.mean_reward, r.kl_mean, r.clip_fraction, r.goal
        );
    }
    for path in emit_curves(&log, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
