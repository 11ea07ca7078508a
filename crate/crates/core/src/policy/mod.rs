//! Feedforward policies, their training under a reward program, and scoring.

mod es;

use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use es::{centered_ranks, Es, EsSettings, Evaluation, GenerationStats};

use crate::channels::{Observation, CHANNELS, CHANNEL_COUNT};
use crate::evaluation::{compute_metrics, EpisodeMetrics};
use crate::morphology::LinkLayout;
use crate::reward::RewardProgram;
use crate::seed::mix;
use crate::sim::{rollout, run_episode, Action, Controller, SimConfig, JOINT_COUNT};

pub const OBS_DIM: usize = CHANNEL_COUNT;
pub const HIDDEN: usize = 32;
pub const ACT_DIM: usize = JOINT_COUNT;
pub const PARAM_DIM: usize =
    OBS_DIM * HIDDEN + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN * ACT_DIM + ACT_DIM;

/// Evaluation seeds used for the shared task score.
pub const EVAL_SEEDS: [u64; 3] = [1000, 1001, 1002];

/// Flat parameters of a `OBS_DIM -> 32 tanh -> 32 tanh -> ACT_DIM tanh`
/// network. Layers are stored row-major, each weight block followed by its
/// bias.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::zeros()
    }
}

impl PolicyParams {
    pub fn zeros() -> Self {
        Self {
            theta: vec![0.0; PARAM_DIM],
        }
    }

    /// Seeded scaled-normal hidden weights and a zero output layer, so a
    /// fresh policy commands zero torque.
    pub fn initial(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; PARAM_DIM];
        let mut off = 0;
        for (fan_in, fan_out) in [(OBS_DIM, HIDDEN), (HIDDEN, HIDDEN)] {
            let n = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("valid stddev");
            for w in &mut theta[off..off + fan_in * fan_out] {
                *w = n.sample(&mut rng);
            }
            off += fan_in * fan_out + fan_out;
        }
        Self { theta }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }
}

fn dense<const I: usize, const O: usize>(theta: &[f64], x: &[f64; I], out: &mut [f64; O]) -> usize {
    let (w, rest) = theta.split_at(I * O);
    for (o, (row, b)) in out.iter_mut().zip(w.chunks_exact(I).zip(rest)) {
        let mut acc = *b;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o = acc.tanh();
    }
    I * O + O
}

/// Deterministic forward pass. Each output lies in `[-limit, limit]`.
pub fn policy_act(p: &PolicyParams, obs: &Observation, torque_limits: &[f64; ACT_DIM]) -> Action {
    let mut x = [0.0; OBS_DIM];
    for (i, c) in CHANNELS.iter().enumerate() {
        x[i] = (obs.0[i] - c.rest) * c.policy_scale;
    }
    let mut h1 = [0.0; HIDDEN];
    let mut h2 = [0.0; HIDDEN];
    let mut y = [0.0; ACT_DIM];
    let mut off = dense(&p.theta, &x, &mut h1);
    off += dense(&p.theta[off..], &h1, &mut h2);
    dense(&p.theta[off..], &h2, &mut y);
    let mut a = [0.0; ACT_DIM];
    for j in 0..ACT_DIM {
        a[j] = y[j] * torque_limits[j];
    }
    Action(a)
}

/// A parameter vector bound to the torque limits of one layout.
#[derive(Debug, Clone, Copy)]
pub struct Policy<'a> {
    pub params: &'a PolicyParams,
    pub torque_limits: [f64; ACT_DIM],
}

impl<'a> Policy<'a> {
    pub fn new(params: &'a PolicyParams, layout: &LinkLayout) -> Self {
        Self {
            params,
            torque_limits: layout.torque_limits(),
        }
    }
}

impl Controller for Policy<'_> {
    fn act(&self, obs: &Observation) -> Action {
        policy_act(self.params, obs, &self.torque_limits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBudget {
    pub total_env_steps: usize,
    /// Members per generation, in antithetic pairs.
    pub population: usize,
    pub episodes_per_eval: usize,
    pub sigma: f64,
    pub step_size: f64,
    /// Set per candidate by the engine; not read from config files.
    #[serde(skip)]
    pub seed: u64,
    /// Length of training rollouts; `None` uses the full horizon. Scoring
    /// always runs the full horizon.
    pub rollout_steps: Option<usize>,
}

impl Default for TrainBudget {
    fn default() -> Self {
        Self {
            total_env_steps: 200_000,
            population: 16,
            episodes_per_eval: 1,
            sigma: 0.05,
            step_size: 0.1,
            seed: 0,
            rollout_steps: None,
        }
    }
}

impl TrainBudget {
    /// Worst-case environment steps of one generation, counting the center
    /// evaluation.
    pub fn generation_steps(&self, horizon: usize) -> usize {
        (self.population + 1) * self.episodes_per_eval * self.rollout_len(horizon)
    }

    pub fn rollout_len(&self, horizon: usize) -> usize {
        self.rollout_steps.map_or(horizon, |n| n.clamp(1, horizon))
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub generation: usize,
    pub best_return: f64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_policy: PolicyParams,
    pub train_return_curve: Vec<CurvePoint>,
    pub env_steps_used: usize,
    /// Why training stopped abnormally, if it did.
    pub failure: Option<String>,
}

impl TrainOutcome {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Writes `generation,best_return,mean_return` rows with a header.
    pub fn write_curve_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["generation", "best_return", "mean_return"])?;
        for p in &self.train_return_curve {
            w.write_record([
                p.generation.to_string(),
                p.best_return.to_string(),
                p.mean_return.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Summed reward of one episode, or `Err` on a non-finite reward.
fn episode_return(
    layout: &LinkLayout,
    cfg: &SimConfig,
    policy: &Policy<'_>,
    reward: &RewardProgram,
    seed: u64,
) -> (Result<f64, f64>, usize) {
    let compiled = reward.compiled();
    let mut stack = Vec::new();
    let mut total = 0.0;
    let mut steps = 0;
    let mut bad = None;
    run_episode(layout, cfg, policy, seed, |obs| {
        steps += 1;
        let r = compiled.eval_with(&obs.0, &mut stack);
        if !r.is_finite() {
            bad = Some(r);
            return ControlFlow::Break(());
        }
        total += r;
        ControlFlow::Continue(())
    });
    (bad.map_or(Ok(total), Err), steps)
}

/// Evolution-strategies training under `reward` for a fixed step budget.
/// Generations run while a full worst-case generation still fits in the
/// remaining budget; the best member seen is returned.
pub fn train_policy(
    layout: &LinkLayout,
    cfg: &SimConfig,
    reward: &RewardProgram,
    budget: &TrainBudget,
) -> TrainOutcome {
    let init = PolicyParams::initial(mix(&[budget.seed, 0x1a1e]));
    let mut outcome = TrainOutcome {
        best_policy: init.clone(),
        train_return_curve: Vec::new(),
        env_steps_used: 0,
        failure: None,
    };
    if budget.population < 2
        || !budget.population.is_multiple_of(2)
        || budget.episodes_per_eval == 0
    {
        outcome.failure = Some("population must be even and positive".into());
        return outcome;
    }
    let gen_steps = budget.generation_steps(cfg.horizon_steps);
    if budget.total_env_steps < gen_steps {
        outcome.failure = Some("budget too small".into());
        return outcome;
    }
    let mut es = Es::new(
        init.theta,
        EsSettings {
            population: budget.population,
            sigma: budget.sigma,
            step_size: budget.step_size,
            seed: budget.seed,
        },
    );
    let limits = layout.torque_limits();
    let train_cfg = SimConfig {
        horizon_steps: budget.rollout_len(cfg.horizon_steps),
        ..cfg.clone()
    };
    let cfg = &train_cfg;
    while outcome.env_steps_used + gen_steps <= budget.total_env_steps {
        let result = es.step(|theta, seed| {
            let params = PolicyParams {
                theta: theta.to_vec(),
            };
            let policy = Policy {
                params: &params,
                torque_limits: limits,
            };
            let mut sum = 0.0;
            let mut cost = 0;
            for ep in 0..budget.episodes_per_eval {
                let (ret, steps) =
                    episode_return(layout, cfg, &policy, reward, mix(&[seed, ep as u64]));
                cost += steps;
                match ret {
                    Ok(r) => sum += r,
                    Err(r) => {
                        return Evaluation { fitness: r, cost };
                    }
                }
            }
            Evaluation {
                fitness: sum / budget.episodes_per_eval as f64,
                cost,
            }
        });
        match result {
            Ok(stats) => {
                outcome.env_steps_used += stats.cost;
                outcome.train_return_curve.push(CurvePoint {
                    generation: stats.generation,
                    best_return: stats.best_fitness,
                    mean_return: stats.mean_fitness,
                });
            }
            Err(cost) => {
                outcome.env_steps_used += cost;
                outcome.failure = Some("reward evaluated to a non-finite value".into());
                break;
            }
        }
    }
    if let Some((_, theta)) = es.into_best() {
        outcome.best_policy = PolicyParams { theta };
    }
    outcome
}

/// Task score: mean torso displacement over `eval_seeds`. Uses only the
/// simulated trajectories, never a reward program.
pub fn score_policy(
    layout: &LinkLayout,
    cfg: &SimConfig,
    p: &PolicyParams,
    eval_seeds: &[u64],
) -> (f64, Vec<EpisodeMetrics>) {
    score_controller(layout, cfg, &Policy::new(p, layout), eval_seeds)
}

/// [`score_policy`] for any controller.
pub fn score_controller<C: Controller + Sync + ?Sized>(
    layout: &LinkLayout,
    cfg: &SimConfig,
    controller: &C,
    eval_seeds: &[u64],
) -> (f64, Vec<EpisodeMetrics>) {
    let metrics: Vec<EpisodeMetrics> = eval_seeds
        .iter()
        .map(|&s| compute_metrics(&rollout(layout, cfg, controller, s), cfg))
        .collect();
    let s = if metrics.is_empty() {
        0.0
    } else {
        metrics.iter().map(|m| m.score_s).sum::<f64>() / metrics.len() as f64
    };
    (s, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{default_design, derive_layout};
    use crate::reward::baseline_reward;

    #[test]
    fn param_dim() {
        assert_eq!(PARAM_DIM, 22 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4);
    }

    #[test]
    fn fresh_policy_is_zero_torque() {
        let p = PolicyParams::initial(5);
        let a = policy_act(&p, &Observation::rest(), &[3.0; 4]);
        assert_eq!(a.0, [0.0; 4]);
        assert_eq!(
            policy_act(&PolicyParams::zeros(), &Observation::rest(), &[3.0; 4]).0,
            [0.0; 4]
        );
    }

    #[test]
    fn outputs_are_bounded() {
        let p = PolicyParams {
            theta: (0..PARAM_DIM)
                .map(|i| ((i * 37 % 11) as f64 - 5.0) * 3.0)
                .collect(),
        };
        let mut obs = Observation::rest();
        obs.0
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 1e6 * (i as f64 - 10.0));
        let limits = [1.0, 2.0, 3.0, 4.0];
        let a = policy_act(&p, &obs, &limits);
        for j in 0..4 {
            assert!(a.0[j].abs() <= limits[j]);
        }
        assert_eq!(a, policy_act(&p, &obs, &limits));
    }

    #[test]
    fn tiny_budget_fails_cleanly() {
        let layout = derive_layout(&default_design());
        let cfg = SimConfig::default();
        let budget = TrainBudget {
            total_env_steps: 1000,
            ..TrainBudget::default()
        };
        let out = train_policy(&layout, &cfg, &baseline_reward(), &budget);
        assert_eq!(out.failure.as_deref(), Some("budget too small"));
        assert_eq!(out.env_steps_used, 0);
    }
}
