//! Parse, validate and evaluate reward programs.
//!
//! cargo run --example reward_dsl -- "forward_speed - 0.1*sq(pitch)"

use codesign::channels::{Channel, Observation};
use codesign::reward::{
    default_probes, eval_reward_step, library_terms, parse_reward, validate_reward,
    DEFAULT_PROBE_SEED, R_MAX,
};

fn main() {
    let mut sources: Vec<String> = std::env::args().skip(1).collect();
    if sources.is_empty() {
        sources = vec![
            "forward_speed + alive - 0.5*ctrl_cost".into(),
            "forward_speed / (height - height)".into(),
            "exp(forward_speed * 100)".into(),
            "forward_speed + wings".into(),
            "clip(forward_speed, 0)".into(),
        ];
    }
    let probes = default_probes(DEFAULT_PROBE_SEED);
    let mut rec = Observation::rest();
    rec.0[Channel::ForwardSpeed.index()] = 0.4;
    rec.0[Channel::Pitch.index()] = 0.1;

    for src in &sources {
        match parse_reward(src) {
            Err(e) => println!("{src}\n  parse error: {e}"),
            Ok(p) => {
                let report = validate_reward(&p, &probes, R_MAX);
                if report.is_ok() {
                    let r = eval_reward_step(&p, &rec).unwrap_or_else(|e| e.0);
                    println!("{src}\n  ok, terms {:?}, r(sample) = {r:.4}", p.term_names);
                } else {
                    println!("{src}\n  rejected: {}", report.violations.join("; "));
                }
            }
        }
    }

    println!("\nlibrary terms:");
    for t in library_terms() {
        let sign = if t.sign < 0.0 { "-" } else { "+" };
        println!("  {sign} {:<18} {}", t.name, t.source);
    }
}
