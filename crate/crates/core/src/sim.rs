//! Deterministic planar rigid-body simulator for the torque-driven quadruped.
//!
//! Links are maximal-coordinate rigid bodies. Each step is split into
//! `substeps`; every substep predicts poses from velocities and external
//! loads, projects joint, joint-limit, passive-spring and ground-contact
//! constraints (XPBD), then derives velocities from the pose change and runs
//! a short velocity pass for friction and damping.
//!
//! Stored body velocities are the mean velocity over the last substep, which
//! makes the position update a leapfrog scheme: a body launched with
//! [`SimState::airborne`] follows a ballistic arc exactly, not to first order.

use std::ops::ControlFlow;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{Channel, Observation};
use crate::morphology::LinkLayout;

pub type Vec2 = Vector2<f64>;

/// Links per robot: torso, two uppers, two lowers.
pub const LINK_COUNT: usize = 5;
/// Actuated joints: front hip, front knee, rear hip, rear knee.
pub const JOINT_COUNT: usize = 4;
/// Contact points: two feet then four torso corners.
const CONTACT_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Control step, seconds.
    pub dt: f64,
    pub substeps: usize,
    /// Constraint projection sweeps per substep.
    pub solver_iterations: usize,
    /// Episode length T in control steps.
    pub horizon_steps: usize,
    /// Gravitational acceleration magnitude, m/s^2, pointing down.
    pub gravity: f64,
    pub ground_friction_coeff: f64,
    /// Normal contact stiffness, N/m.
    pub contact_stiffness: f64,
    /// Normal contact damping, N·s/m.
    pub contact_damping: f64,
    /// Passive rotational spring at every joint, N·m/rad, toward the rest pose.
    pub joint_stiffness: f64,
    /// Passive rotational damping at every joint, N·m·s/rad.
    pub joint_damping: f64,
    /// Gaussian actuator noise, as a fraction of each joint's torque limit.
    pub action_noise: f64,
    /// Torque that counts as one unit of control effort in `ctrl_cost` and
    /// `action_delta_cost`, N·m. Shared by all designs.
    pub effort_torque: f64,
    /// Healthy torso height interval; derived from the layout when `None`.
    pub healthy_height: Option<(f64, f64)>,
    /// Largest healthy |pitch|, radians.
    pub healthy_pitch: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            substeps: 4,
            solver_iterations: 2,
            horizon_steps: 1000,
            gravity: 9.81,
            ground_friction_coeff: 0.8,
            contact_stiffness: 2.0e5,
            contact_damping: 400.0,
            joint_stiffness: 8.0,
            joint_damping: 0.05,
            action_noise: 0.02,
            effort_torque: 10.0,
            healthy_height: None,
            healthy_pitch: 1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite simulator state at step {step}")]
    NumericalBlowup { step: usize },
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}

impl SimConfig {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.substeps == 0 || self.solver_iterations == 0 {
            return bad("substeps and solver_iterations must be at least 1");
        }
        if self.horizon_steps == 0 {
            return bad("horizon_steps must be positive");
        }
        if let Some((lo, hi)) = self.healthy_height {
            if !(lo < hi) {
                return bad("healthy_height requires h_min < h_max");
            }
        }
        if !(self.effort_torque > 0.0) {
            return bad("effort_torque must be positive");
        }
        if !(self.contact_stiffness > 0.0) {
            return bad("contact_stiffness must be positive");
        }
        Ok(())
    }

    pub fn health_bounds(&self, layout: &LinkLayout) -> HealthBounds {
        let (h_min, h_max) = self
            .healthy_height
            .unwrap_or((0.5 * layout.min_leg_length, 2.0 * layout.standing_height));
        HealthBounds {
            h_min,
            h_max,
            max_pitch: self.healthy_pitch,
        }
    }

    /// Simulated seconds per episode.
    pub fn horizon_seconds(&self) -> f64 {
        self.dt * self.horizon_steps as f64
    }
}

/// Closed intervals defining a healthy (upright) robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthBounds {
    pub h_min: f64,
    pub h_max: f64,
    pub max_pitch: f64,
}

pub fn is_healthy(obs: &Observation, bounds: &HealthBounds) -> bool {
    let h = obs.height();
    h >= bounds.h_min && h <= bounds.h_max && obs.pitch().abs() <= bounds.max_pitch
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub pos: Vec2,
    pub angle: f64,
    pub vel: Vec2,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub bodies: [BodyState; LINK_COUNT],
    pub step_index: usize,
    /// Previous commanded action in effort units.
    pub prev_action: [f64; JOINT_COUNT],
    rng: ChaCha8Rng,
}

/// Joint torques in N·m, in joint order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action(pub [f64; JOINT_COUNT]);

pub fn init_state(layout: &LinkLayout, _cfg: &SimConfig, seed: u64) -> SimState {
    let mut bodies = [BodyState {
        pos: Vec2::zeros(),
        angle: 0.0,
        vel: Vec2::zeros(),
        omega: 0.0,
    }; LINK_COUNT];
    for (b, l) in bodies.iter_mut().zip(&layout.links) {
        b.pos = Vec2::new(l.position[0], l.position[1]);
        b.angle = l.angle;
    }
    SimState {
        bodies,
        step_index: 0,
        prev_action: [0.0; JOINT_COUNT],
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

impl SimState {
    /// Rest pose raised by `lift` meters and moving rigidly with `velocity`.
    ///
    /// Stored velocities are offset by half a substep of gravity so that the
    /// leapfrog update reproduces the exact ballistic trajectory.
    pub fn airborne(
        layout: &LinkLayout,
        cfg: &SimConfig,
        seed: u64,
        lift: f64,
        velocity: [f64; 2],
    ) -> SimState {
        let mut s = init_state(layout, cfg, seed);
        let h = cfg.dt / cfg.substeps as f64;
        for b in &mut s.bodies {
            b.pos.y += lift;
            b.vel = Vec2::new(velocity[0], velocity[1] + 0.5 * h * cfg.gravity);
        }
        s
    }

    pub fn torso(&self) -> &BodyState {
        &self.bodies[0]
    }

    pub fn is_finite(&self) -> bool {
        self.bodies.iter().all(|b| {
            b.pos.iter().all(|v| v.is_finite())
                && b.vel.iter().all(|v| v.is_finite())
                && b.angle.is_finite()
                && b.omega.is_finite()
        })
    }

    /// Lowest point of any contact geometry, meters (negative = penetration).
    pub fn lowest_point(&self, layout: &LinkLayout) -> f64 {
        contact_points(layout)
            .iter()
            .map(|(b, local)| {
                let body = &self.bodies[*b];
                (body.pos + rotate(body.angle, *local)).y
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn rotate(angle: f64, v: [f64; 2]) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v[0] - s * v[1], s * v[0] + c * v[1])
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w > std::f64::consts::PI {
        w -= two_pi;
    } else if w <= -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

fn contact_points(layout: &LinkLayout) -> [(usize, [f64; 2]); CONTACT_POINTS] {
    let mut out = [(0usize, [0.0; 2]); CONTACT_POINTS];
    out[0] = layout.feet[0];
    out[1] = layout.feet[1];
    for (o, c) in out[2..].iter_mut().zip(&layout.torso_corners) {
        *o = (0, *c);
    }
    out
}

struct MassProps {
    inv_mass: [f64; LINK_COUNT],
    inv_inertia: [f64; LINK_COUNT],
}

impl MassProps {
    fn new(layout: &LinkLayout) -> Self {
        let mut inv_mass = [0.0; LINK_COUNT];
        let mut inv_inertia = [0.0; LINK_COUNT];
        for (i, l) in layout.links.iter().enumerate() {
            inv_mass[i] = 1.0 / l.mass;
            inv_inertia[i] = 1.0 / l.inertia;
        }
        Self {
            inv_mass,
            inv_inertia,
        }
    }

    /// Generalized inverse mass of body `b` at world offset `r` along `n`.
    fn point_weight(&self, b: usize, r: &Vec2, n: &Vec2) -> f64 {
        let rn = cross(r, n);
        self.inv_mass[b] + self.inv_inertia[b] * rn * rn
    }
}

fn apply_position_impulse(body: &mut BodyState, m: &MassProps, b: usize, r: &Vec2, p: Vec2) {
    body.pos += p * m.inv_mass[b];
    body.angle += m.inv_inertia[b] * cross(r, &p);
}

fn apply_velocity_impulse(body: &mut BodyState, m: &MassProps, b: usize, r: &Vec2, p: Vec2) {
    body.vel += p * m.inv_mass[b];
    body.omega += m.inv_inertia[b] * cross(r, &p);
}

fn point_velocity(body: &BodyState, r: &Vec2) -> Vec2 {
    body.vel + Vec2::new(-r.y, r.x) * body.omega
}

/// Per-step contact impulses, N·s.
#[derive(Debug, Clone, Copy, Default)]
struct ContactImpulses {
    normal: [f64; CONTACT_POINTS],
}

fn substep(
    bodies: &mut [BodyState; LINK_COUNT],
    torques: &[f64; JOINT_COUNT],
    layout: &LinkLayout,
    cfg: &SimConfig,
    mass: &MassProps,
    h: f64,
    impulses: &mut ContactImpulses,
) {
    let gravity = Vec2::new(0.0, -cfg.gravity);
    let mut body_torque = [0.0; LINK_COUNT];
    for (j, joint) in layout.joints.iter().enumerate() {
        body_torque[joint.child] += torques[j];
        body_torque[joint.parent] -= torques[j];
    }

    let prev: [(Vec2, f64); LINK_COUNT] = std::array::from_fn(|i| (bodies[i].pos, bodies[i].angle));
    for (i, b) in bodies.iter_mut().enumerate() {
        b.vel += gravity * h;
        b.omega += h * body_torque[i] * mass.inv_inertia[i];
        b.pos += b.vel * h;
        b.angle += h * b.omega;
    }

    let contacts = contact_points(layout);
    let contact_alpha = 1.0 / (cfg.contact_stiffness * h * h);
    let spring_alpha = if cfg.joint_stiffness > 0.0 {
        Some(1.0 / (cfg.joint_stiffness * h * h))
    } else {
        None
    };
    let mu = cfg.ground_friction_coeff;
    let mut lambda_n = [0.0; CONTACT_POINTS];
    let mut lambda_t = [0.0; CONTACT_POINTS];
    let mut lambda_spring = [0.0; JOINT_COUNT];
    let up = Vec2::new(0.0, 1.0);
    let along = Vec2::new(1.0, 0.0);

    for _ in 0..cfg.solver_iterations {
        for joint in &layout.joints {
            let (p, c) = (joint.parent, joint.child);
            let rp = rotate(bodies[p].angle, joint.parent_anchor);
            let rc = rotate(bodies[c].angle, joint.child_anchor);
            let d = (bodies[c].pos + rc) - (bodies[p].pos + rp);
            let err = d.norm();
            if err < 1e-14 {
                continue;
            }
            let n = d / err;
            let w = mass.point_weight(p, &rp, &n) + mass.point_weight(c, &rc, &n);
            let impulse = n * (-err / w);
            apply_position_impulse(&mut bodies[c], mass, c, &rc, impulse);
            apply_position_impulse(&mut bodies[p], mass, p, &rp, -impulse);
        }

        for (j, joint) in layout.joints.iter().enumerate() {
            let (p, c) = (joint.parent, joint.child);
            let w = mass.inv_inertia[p] + mass.inv_inertia[c];
            let rotate_by = |bodies: &mut [BodyState; LINK_COUNT], dl: f64| {
                bodies[c].angle += mass.inv_inertia[c] * dl;
                bodies[p].angle -= mass.inv_inertia[p] * dl;
            };
            if let Some(alpha) = spring_alpha {
                let phi = bodies[c].angle - bodies[p].angle - joint.rest_angle;
                let dl = (-phi - alpha * lambda_spring[j]) / (w + alpha);
                lambda_spring[j] += dl;
                rotate_by(bodies, dl);
            }
            let phi = bodies[c].angle - bodies[p].angle - joint.rest_angle;
            let violation = if phi > joint.range.hi {
                phi - joint.range.hi
            } else if phi < joint.range.lo {
                phi - joint.range.lo
            } else {
                0.0
            };
            if violation != 0.0 {
                rotate_by(bodies, -violation / w);
            }
        }

        for (k, (b, local)) in contacts.iter().enumerate() {
            let b = *b;
            let r = rotate(bodies[b].angle, *local);
            let y = bodies[b].pos.y + r.y;
            if y >= 0.0 && lambda_n[k] == 0.0 {
                continue;
            }
            let w = mass.point_weight(b, &r, &up);
            let dl = ((-y - contact_alpha * lambda_n[k]) / (w + contact_alpha)).max(-lambda_n[k]);
            lambda_n[k] += dl;
            apply_position_impulse(&mut bodies[b], mass, b, &r, up * dl);

            if lambda_n[k] > 0.0 {
                // Static friction: undo tangential slip of the contact point
                // when the required impulse fits in the friction cone.
                let r = rotate(bodies[b].angle, *local);
                let now = bodies[b].pos + r;
                let before = prev[b].0 + rotate(prev[b].1, *local);
                let slip = now.x - before.x;
                let wt = mass.point_weight(b, &r, &along);
                let dlt = -slip / wt;
                if (lambda_t[k] + dlt).abs() <= mu * lambda_n[k] {
                    lambda_t[k] += dlt;
                    apply_position_impulse(&mut bodies[b], mass, b, &r, along * dlt);
                }
            }
        }
    }

    for (b, (pos, angle)) in bodies.iter_mut().zip(prev.iter()) {
        b.vel = (b.pos - pos) / h;
        b.omega = (b.angle - angle) / h;
    }

    for (k, (b, local)) in contacts.iter().enumerate() {
        if lambda_n[k] <= 0.0 {
            continue;
        }
        let b = *b;
        let jn = lambda_n[k] / h;
        let r = rotate(bodies[b].angle, *local);
        let vt = point_velocity(&bodies[b], &r).x;
        let wt = mass.point_weight(b, &r, &along);
        let jt = (-vt / wt).clamp(-mu * jn, mu * jn);
        apply_velocity_impulse(&mut bodies[b], mass, b, &r, along * jt);

        let vn = point_velocity(&bodies[b], &r).y;
        let wn = mass.point_weight(b, &r, &up);
        let jd = (-vn * (cfg.contact_damping * h).min(1.0 / wn)).max(-jn);
        apply_velocity_impulse(&mut bodies[b], mass, b, &r, up * jd);
        impulses.normal[k] += jn + jd;
    }

    if cfg.joint_damping > 0.0 {
        for joint in &layout.joints {
            let (p, c) = (joint.parent, joint.child);
            let w = mass.inv_inertia[p] + mass.inv_inertia[c];
            let rel = bodies[c].omega - bodies[p].omega;
            let l = -rel * (cfg.joint_damping * h * w).min(1.0) / w;
            bodies[c].omega += mass.inv_inertia[c] * l;
            bodies[p].omega -= mass.inv_inertia[p] * l;
        }
    }
}

fn relative_angle(bodies: &[BodyState; LINK_COUNT], layout: &LinkLayout, j: usize) -> f64 {
    let joint = &layout.joints[j];
    wrap_angle(bodies[joint.child].angle - bodies[joint.parent].angle - joint.rest_angle)
}

fn fill_pose_channels(obs: &mut Observation, state: &SimState, layout: &LinkLayout) {
    let torso = state.torso();
    obs[Channel::TorsoX] = torso.pos.x;
    obs[Channel::Height] = torso.pos.y;
    obs[Channel::Pitch] = wrap_angle(torso.angle);
    for j in 0..JOINT_COUNT {
        let joint = &layout.joints[j];
        obs[Channel::JointAngle(j as u8)] = relative_angle(&state.bodies, layout, j);
        obs[Channel::JointVel(j as u8)] =
            state.bodies[joint.child].omega - state.bodies[joint.parent].omega;
    }
}

/// Observation of a freshly initialized state.
pub fn observe_initial(state: &SimState, layout: &LinkLayout, cfg: &SimConfig) -> Observation {
    let mut obs = Observation::default();
    fill_pose_channels(&mut obs, state, layout);
    for (i, (b, local)) in layout.feet.iter().enumerate() {
        let body = &state.bodies[*b];
        let y = (body.pos + rotate(body.angle, *local)).y;
        obs[Channel::Contact(i as u8)] = if y <= 1e-9 { 1.0 } else { 0.0 };
    }
    obs[Channel::Alive] = if is_healthy(&obs, &cfg.health_bounds(layout)) {
        1.0
    } else {
        0.0
    };
    obs
}

/// Advances `state` by one control step in place.
pub fn step_in_place(
    state: &mut SimState,
    action: &Action,
    layout: &LinkLayout,
    cfg: &SimConfig,
) -> Result<Observation, SimError> {
    let limits = layout.torque_limits();
    let mut commanded = [0.0; JOINT_COUNT];
    let mut applied = [0.0; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        let a = if action.0[j].is_nan() {
            0.0
        } else {
            action.0[j]
        };
        commanded[j] = a.clamp(-limits[j], limits[j]);
        let noise = if cfg.action_noise > 0.0 {
            let z: f64 = StandardNormal.sample(&mut state.rng);
            cfg.action_noise * limits[j] * z
        } else {
            0.0
        };
        applied[j] = (commanded[j] + noise).clamp(-limits[j], limits[j]);
    }

    let before = *state.torso();
    let mass = MassProps::new(layout);
    let h = cfg.dt / cfg.substeps as f64;
    let mut impulses = ContactImpulses::default();
    for _ in 0..cfg.substeps {
        substep(
            &mut state.bodies,
            &applied,
            layout,
            cfg,
            &mass,
            h,
            &mut impulses,
        );
    }
    state.step_index += 1;
    if !state.is_finite() {
        return Err(SimError::NumericalBlowup {
            step: state.step_index,
        });
    }

    let mut obs = Observation::default();
    fill_pose_channels(&mut obs, state, layout);
    let torso = state.torso();
    obs[Channel::ForwardSpeed] = (torso.pos.x - before.pos.x) / cfg.dt;
    obs[Channel::VerticalSpeed] = (torso.pos.y - before.pos.y) / cfg.dt;
    obs[Channel::PitchRate] = (torso.angle - before.angle) / cfg.dt;
    for i in 0..2 {
        obs[Channel::Contact(i as u8)] = if impulses.normal[i] > 0.0 { 1.0 } else { 0.0 };
    }

    let weight_impulse = layout.total_mass() * cfg.gravity * cfg.dt;
    obs[Channel::ContactCost] = impulses
        .normal
        .iter()
        .map(|j| (j / weight_impulse).powi(2))
        .sum();
    let mut ctrl = 0.0;
    let mut delta = 0.0;
    let mut normalized = [0.0; JOINT_COUNT];
    for j in 0..JOINT_COUNT {
        normalized[j] = commanded[j] / cfg.effort_torque;
        ctrl += normalized[j] * normalized[j];
        let d = normalized[j] - state.prev_action[j];
        delta += d * d;
    }
    obs[Channel::CtrlCost] = ctrl;
    obs[Channel::ActionDeltaCost] = delta;
    state.prev_action = normalized;
    obs[Channel::Alive] = if is_healthy(&obs, &cfg.health_bounds(layout)) {
        1.0
    } else {
        0.0
    };
    Ok(obs)
}

/// Pure form of [`step_in_place`].
pub fn step(
    state: &SimState,
    action: &Action,
    layout: &LinkLayout,
    cfg: &SimConfig,
) -> Result<(SimState, Observation), SimError> {
    let mut next = state.clone();
    let obs = step_in_place(&mut next, action, layout, cfg)?;
    Ok((next, obs))
}

/// Maps observations to joint torques.
pub trait Controller {
    fn act(&self, obs: &Observation) -> Action;
}

impl<F: Fn(&Observation) -> Action> Controller for F {
    fn act(&self, obs: &Observation) -> Action {
        self(obs)
    }
}

/// Zero torque on every joint.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl Controller for Passive {
    fn act(&self, _obs: &Observation) -> Action {
        Action::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Ran the full horizon.
    Horizon,
    Unhealthy,
    NumericalBlowup,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::Unhealthy => "unhealthy",
            Termination::NumericalBlowup => "numerical_blowup",
        }
    }
}

/// Observations of one episode: the initial observation followed by one
/// observation per executed step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Observation>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.observations.len().saturating_sub(1)
    }

    /// Torso displacement from the initial observation to the last one.
    pub fn displacement(&self) -> f64 {
        match (self.observations.first(), self.observations.last()) {
            (Some(a), Some(b)) => b.torso_x() - a.torso_x(),
            _ => 0.0,
        }
    }

    /// Writes a comma-separated dump with a header row of channel names.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Observation::header())?;
        for o in &self.observations {
            w.write_record(o.0.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs one episode, handing each post-step observation to `on_step`.
/// Returns the initial observation, the final observation and the
/// termination reason.
pub fn run_episode<C: Controller + ?Sized>(
    layout: &LinkLayout,
    cfg: &SimConfig,
    controller: &C,
    seed: u64,
    mut on_step: impl FnMut(&Observation) -> ControlFlow<()>,
) -> (Observation, Observation, Termination) {
    let mut state = init_state(layout, cfg, seed);
    let first = observe_initial(&state, layout, cfg);
    let mut last = first;
    let mut obs = first;
    let termination = loop {
        if state.step_index >= cfg.horizon_steps {
            break Termination::Horizon;
        }
        let action = controller.act(&obs);
        match step_in_place(&mut state, &action, layout, cfg) {
            Ok(o) => {
                obs = o;
                last = o;
                if on_step(&obs).is_break() {
                    break Termination::Horizon;
                }
                if obs[Channel::Alive] == 0.0 {
                    break Termination::Unhealthy;
                }
            }
            Err(_) => break Termination::NumericalBlowup,
        }
    };
    (first, last, termination)
}

/// Runs until the horizon or the first unhealthy step.
pub fn rollout<C: Controller + ?Sized>(
    layout: &LinkLayout,
    cfg: &SimConfig,
    controller: &C,
    seed: u64,
) -> Trajectory {
    let mut observations = Vec::with_capacity(cfg.horizon_steps + 1);
    let state = init_state(layout, cfg, seed);
    observations.push(observe_initial(&state, layout, cfg));
    let (_, _, termination) = run_episode(layout, cfg, controller, seed, |o| {
        observations.push(*o);
        ControlFlow::Continue(())
    });
    Trajectory {
        observations,
        termination,
    }
}
