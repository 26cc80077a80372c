//! Scores a clean demonstration and a segment that never moves, shows the
//! feedback tags and the instruction rewritten for the retry.
//!
//! cargo run --example critic_feedback

use closedloop::critic::{evaluate, CriticConfig, CriticReport, DIMENSIONS};
use closedloop::microworld::{reference_segment, DomainSpec, Segment};
use closedloop::numerics::RandomSource;
use closedloop::planner::{BfsPlanner, Goal, Planner};

fn show(label: &str, k: &DomainSpec, r: &CriticReport, tau: f64) {
    println!("{label}: reward {:.3}, accepted {}", r.scalar, r.accepted(tau));
    for (d, (score, reason)) in DIMENSIONS.iter().zip(r.scores.0.iter().zip(&r.reasons)) {
        println!("  {:<20} {score:.3}  {reason}", d.name());
    }
    for tag in &r.tags {
        println!("  tag: {}", tag.render(k));
    }
    if !r.tags.is_empty() {
        println!("  revised: {}", r.revised_instruction);
    }
}

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let config = CriticConfig::default();
    let step = BfsPlanner::default().plan(&k, &Goal::parse(&k, "jar.lid_removed")?, &k.initial)?.steps.remove(0);
    println!("step: {}\n", step.instruction);

    let good = reference_segment(&k, &k.initial, step.operator, k.frames, 0.01, &mut RandomSource::new(1, 0))?;
    show("demonstration", &k, &evaluate(&k, &good, &step, &config)?, config.tau);
    println!();
    let frozen = Segment::frozen(good.first_frame(), k.frames)?;
    show("frozen", &k, &evaluate(&k, &frozen, &step, &config)?, config.tau);
    Ok(())
}
