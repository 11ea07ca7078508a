//! Train a controller for the default design with evolution strategies.
//!
//! cargo run --release --example train_policy -- [env_steps] [seed] [step_size]

use codesign::morphology::{default_design, derive_layout};
use codesign::policy::{score_policy, train_policy, TrainBudget, EVAL_SEEDS};
use codesign::reward::baseline_reward;
use codesign::sim::SimConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let steps = args
        .next()
        .map_or(200_000, |s| s.parse().expect("env_steps"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let step_size = args.next().map(|s| s.parse().expect("step_size"));

    let cfg = SimConfig::default();
    let layout = derive_layout(&default_design());
    let reward = baseline_reward();
    let mut budget = TrainBudget {
        total_env_steps: steps,
        seed,
        ..TrainBudget::default()
    };
    if let Some(step) = step_size {
        budget.step_size = step;
    }
    let started = std::time::Instant::now();
    let out = train_policy(&layout, &cfg, &reward, &budget);
    if let Some(reason) = &out.failure {
        eprintln!("training failed: {reason}");
    }
    for p in &out.train_return_curve {
        println!(
            "generation {:>3}  best {:>8.2}  mean {:>8.2}",
            p.generation, p.best_return, p.mean_return
        );
    }
    let (s, metrics) = score_policy(&layout, &cfg, &out.best_policy, &EVAL_SEEDS);
    println!(
        "{} env steps in {:.1} s; score {s:.3} m, fell in {}/{} eval episodes",
        out.env_steps_used,
        started.elapsed().as_secs_f64(),
        metrics.iter().filter(|m| m.fell).count(),
        metrics.len()
    );
}
