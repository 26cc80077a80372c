//! Goal decomposition into atomic operator steps, plan validation and
//! failure-driven replanning.

mod search;
mod types;

pub use search::{plan, plan_with_budget, replan, validate_plan, BfsPlanner, Planner, DEFAULT_NODE_BUDGET};
pub use types::{instruction_for, ActionSpec, FailureContext, Goal, PlanSequence, PlanStep, ValidationReport, MAX_INSTRUCTION_WORDS};
