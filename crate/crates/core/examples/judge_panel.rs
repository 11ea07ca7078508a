//! Grade a few episodes with the default judge panel.
//!
//! cargo run --example judge_panel

use codesign::evaluation::{default_judges, run_panel, EpisodeMetrics};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        (
            "standing still",
            EpisodeMetrics {
                survival_frac: 1.0,
                mean_abs_pitch: 0.02,
                ..EpisodeMetrics::default()
            },
        ),
        (
            "fast but falls",
            EpisodeMetrics {
                score_s: 3.1,
                mean_forward_speed: 0.62,
                survival_frac: 0.5,
                mean_abs_pitch: 0.4,
                total_ctrl_cost: 500.0,
                total_action_delta: 80.0,
                fell: true,
                ..EpisodeMetrics::default()
            },
        ),
        (
            "steady walker",
            EpisodeMetrics {
                score_s: 12.0,
                mean_forward_speed: 1.2,
                survival_frac: 1.0,
                mean_abs_pitch: 0.05,
                total_ctrl_cost: 30.0,
                total_action_delta: 4.0,
                ..EpisodeMetrics::default()
            },
        ),
    ];
    let judges = default_judges();
    for (name, m) in &cases {
        let fb = run_panel(&judges, m)?;
        let tags: Vec<&str> = fb.tags().iter().map(|t| t.name()).collect();
        println!("{name}: aggregate {:.2}, tags {tags:?}", fb.aggregate_grade);
        println!("  {}\n", fb.rationale);
    }
    Ok(())
}
