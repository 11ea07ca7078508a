//! Ask a chat-completion endpoint for a thesis edit and reward programs.
//!
//! CODESIGN_LLM_ENDPOINT=https://host/v1/chat/completions CODESIGN_LLM_KEY=... \
//!     cargo run --example remote_agent -- [model]

use codesign::agents::{AgentContext, RemoteClient, RemoteConfig};
use codesign::morphology::default_design;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "gpt-4o-mini".into());
    let config = match RemoteConfig::from_env(model) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            eprintln!(
                "set CODESIGN_LLM_ENDPOINT (and CODESIGN_LLM_KEY if needed) to try a live endpoint"
            );
            return Ok(());
        }
    };
    let client = RemoteClient::new(RemoteConfig {
        token_cap: Some(20_000),
        ..config
    });
    let ctx = AgentContext::new(default_design(), 1, 42);

    let edit = client.propose_thesis(&ctx)?;
    println!("thesis: {}", edit.rationale);
    for c in &edit.changes {
        println!("  {} {} {}", c.path, c.kind.name(), c.value);
    }
    let rewards = client.generate_rewards(&ctx, &default_design())?;
    for p in &rewards.programs {
        println!("reward: {}", p.source);
    }
    println!(
        "{} repairs, {} dropped, {} tokens",
        rewards.repair_attempts_used,
        rewards.dropped.len(),
        client.tokens_used()
    );
    Ok(())
}
