//! Difficulty-stratified task suites, action-quality metrics, comparison
//! tables and training curves.

mod compare;
mod curves;
mod metrics;
mod suite;

pub use compare::{compare, ComparisonRow, ComparisonTable, COMPARED};
pub use curves::{emit_curves, render_svg};
pub use metrics::{available_workers, evaluate_policy, evaluate_policy_with_workers, to_scale, DifficultySummary, MetricReport, MetricSummary};
pub use suite::{generate_suite, sample_tasks, Difficulty, PromptSuite, Task};
