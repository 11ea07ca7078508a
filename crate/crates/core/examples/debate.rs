//! A short scripted co-design debate at reduced budget.
//!
//! cargo run --release --example debate -- [out_dir]

use codesign::archive::Phase;
use codesign::engine::{run_debate, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "runs/example".into())
        .into();
    cfg.rounds = 2;
    cfg.budget.total_env_steps = 40_000;

    let report = run_debate(&cfg)?;
    for r in &report.rounds {
        println!(
            "round {}: thesis mean {:.2} m, synthesis mean {:.2} m",
            r.round_index,
            r.mean_score(Phase::Thesis).unwrap_or(f64::NAN),
            r.mean_score(Phase::Synthesis).unwrap_or(f64::NAN),
        );
        if let Some(s) = &r.synthesis {
            println!("  synthesis edit: {}", s.edit.rationale);
        }
    }
    println!(
        "best {:.3} m with `{}`; run written to {}",
        report.best.score_s,
        report.best.reward_source,
        report.out_dir.display()
    );
    Ok(())
}
