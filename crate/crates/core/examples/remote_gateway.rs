//! Runs one episode with the planner and critic behind HTTP: a scripted mock
//! server answers /plan and /critic, the first critique rejects and the
//! retry with the revised instruction is accepted.
//!
//! cargo run --example remote_gateway

use std::path::Path;
use std::sync::Arc;

use closedloop::critic::CriticConfig;
use closedloop::episode::{run_episode, LoopConfig};
use closedloop::gateway::{MockScript, MockServer, RemoteConfig, RemoteCritic, RemotePlanner, WireClient};
use closedloop::microworld::DomainSpec;
use closedloop::numerics::RandomSource;
use closedloop::planner::Goal;
use closedloop::worldmodel::OraclePolicy;

fn main() -> closedloop::Result<()> {
    let k = DomainSpec::kitchen();
    let script = MockScript::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mock_script.json"))?;
    let server = MockServer::start(script, 0)?;
    println!("mock server at {}", server.base_url());

    let client = Arc::new(WireClient::new(RemoteConfig::new(&server.base_url()))?);
    let planner = RemotePlanner { client: client.clone() };
    let critic = RemoteCritic { client: client.clone(), config: CriticConfig::default() };
    let goal = Goal::parse(&k, "jar.lid_removed")?;
    let log = run_episode(&k, &goal, &planner, &OraclePolicy::default(), &critic, &LoopConfig::default(), &mut RandomSource::new(10, 0))?;
    println!("status {}, {} segments\n", log.status.name(), log.segments_generated);

    for a in &log.attempts {
        println!("attempt {} '{}': reward {:.2}, accepted {}", a.attempt, a.instruction, a.report.scalar, a.accepted);
    }
    println!();
    for e in client.transcript() {
        let clip = |s: &str| s.chars().take(100).collect::<String>();
        println!("POST {} -> {:?}", e.endpoint, e.status);
        println!("  request  {}...", clip(&e.request));
        println!("  response {}...", clip(&e.response));
    }
    Ok(())
}
