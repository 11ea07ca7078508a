//! Roll out a hand-written controller and dump the trajectory as CSV.
//!
//! cargo run --example simulate > gait.csv

use std::cell::Cell;

use codesign::channels::Observation;
use codesign::evaluation::compute_metrics;
use codesign::morphology::{default_design, derive_layout};
use codesign::sim::{rollout, Action, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig::default();
    let layout = derive_layout(&default_design());
    let limits = layout.torque_limits();

    // Open-loop sine gait; joints swing a quarter cycle apart.
    let step = Cell::new(0usize);
    let gait = |_: &Observation| {
        let t = step.get() as f64 * cfg.dt;
        step.set(step.get() + 1);
        let w = 2.0 * std::f64::consts::PI * 1.5;
        let phase = [
            0.0,
            0.5 * std::f64::consts::PI,
            std::f64::consts::PI,
            1.5 * std::f64::consts::PI,
        ];
        let mut a = [0.0; 4];
        for (j, u) in a.iter_mut().enumerate() {
            *u = 0.8 * limits[j] * (w * t + phase[j]).sin();
        }
        Action(a)
    };
    let traj = rollout(&layout, &cfg, &gait, 7);
    let m = compute_metrics(&traj, &cfg);
    eprintln!(
        "{} steps, ended by {}, displacement {:.3} m, mean |pitch| {:.3} rad",
        traj.steps(),
        traj.termination.as_str(),
        m.score_s,
        m.mean_abs_pitch
    );
    traj.write_csv(std::io::stdout().lock())?;
    Ok(())
}
