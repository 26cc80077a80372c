//! Pluggable agent backends: the built-in planner and critic, or remote
//! endpoints speaking JSON over HTTP, plus a scripted mock server.
//!
//! Endpoints: `POST /plan`, `POST /replan`, `POST /critic`. Bodies are
//! documented with examples in `docs/wire.md`.

mod client;
mod mock;
mod remote;
mod wire;

pub use client::{sha256_hex, Exchange, RemoteConfig, WireClient};
pub use mock::{MockRule, MockScript, MockServer, Received};
pub use remote::{AgentBackend, RemoteCritic, RemotePlanner};
pub use wire::{
    parse_wire, plan_from_wire, plan_to_wire, report_from_wire, segment_summary, state_summary, step_from_wire, step_to_wire,
    strip_think, ActionWire, CriticRequest, CriticWire, DimensionWire, PerActionWire, PerEventWire, PlanRequest, PlanWire,
    ReplanRequest, ScoresWire, StepWire,
};
