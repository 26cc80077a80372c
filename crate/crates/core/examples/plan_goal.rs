//! Breadth-first planning over pre/post operators, plan validation and a
//! replan after a failed step.
//!
//! cargo run --example plan_goal

use closedloop::critic::FeedbackTag;
use closedloop::microworld::DomainSpec;
use closedloop::planner::{validate_plan, BfsPlanner, FailureContext, Goal, Planner};

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let goal = Goal::parse(&k, "cup.full, cup.stirred")?;
    let planner = BfsPlanner::default();
    let plan = planner.plan(&k, &goal, &k.initial)?;
    println!("goal: {}", goal.description);
    for s in &plan.steps {
        println!("  {}. {:<32} pre {}  post {}", s.sid, s.instruction, k.display_literals(&s.pre), k.display_literals(&s.post));
    }
    println!("valid: {}", validate_plan(&k, &plan, &k.initial, Some(&goal)).is_ok());

    // the first step was rejected; replan from where the world stands
    let failed = &plan.steps[0];
    let tag = FeedbackTag::PostConditionUnmet(failed.post[0]);
    let failure = FailureContext {
        executed: Vec::new(),
        failed: failed.clone(),
        feedback_tags: vec![tag],
        feedback_text: tag.render(&k),
        remaining: plan.clone(),
    };
    let again = planner.replan(&k, &goal, &failure, &k.initial)?;
    println!("replan from sid {}: {} steps", again.steps[0].sid, again.len());

    match planner.plan(&k, &Goal::parse(&k, "cup.full, !cup.full")?, &k.initial) {
        Err(e) => println!("contradictory goal: {e}"),
        Ok(p) => println!("unexpected plan of {} steps", p.len()),
    }
    Ok(())
}
