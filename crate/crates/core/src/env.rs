//! Deterministic kinematic simulator of the tile-transport task, plus a
//! synthetic expert that stands in for kinesthetic demonstrations.
//!
//! The robot's end-effector moves inside an axis-aligned workspace box
//! toward a target while avoiding a single spherical obstacle. Actions
//! command an absolute position; the per-step displacement is capped at
//! `max_step`. Collision is reflected only through the `dist_obstacle`
//! state feature — there is no contact response, and every rollout runs
//! the full horizon.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PolicyNet;
use crate::rng::Stream;
use crate::types::{EnvAction, EnvState, Step, Trajectory, TrajectorySource};
use crate::vec3::{self, Vec3};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub min: Vec3,
    pub max: Vec3,
}

impl Box3 {
    pub fn validate(&self) -> Result<()> {
        if !vec3::is_finite(self.min) || !vec3::is_finite(self.max) {
            return Err(Error::Config("box has non-finite corners".into()));
        }
        for i in 0..3 {
            if self.min[i] > self.max[i] {
                return Err(Error::Config(format!(
                    "box min {} > max {} on axis {i}",
                    self.min[i], self.max[i]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn contains_box(&self, other: &Box3) -> bool {
        self.contains(other.min, 0.0) && self.contains(other.max, 0.0)
    }

    pub fn center(&self) -> Vec3 {
        vec3::scale(vec3::add(self.min, self.max), 0.5)
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [[0.0; 3]; 8];
        for (k, corner) in out.iter_mut().enumerate() {
            for i in 0..3 {
                corner[i] = if k & (1 << i) == 0 {
                    self.min[i]
                } else {
                    self.max[i]
                };
            }
        }
        out
    }

    /// Uniform sample; degenerate axes collapse to their single value.
    pub fn sample(&self, rng: &mut Stream) -> Vec3 {
        let mut p = [0.0; 3];
        for i in 0..3 {
            p[i] = if self.min[i] == self.max[i] {
                self.min[i]
            } else {
                rng.gen_range(self.min[i]..self.max[i])
            };
        }
        p
    }
}

/// Spherical obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

/// Geometry and horizon of the transport task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub workspace: Box3,
    pub obstacle: Sphere,
    pub target: Vec3,
    pub start_region: Box3,
    /// Success radius: the task succeeds when the final end-effector
    /// position is within this distance of the target (meters).
    pub success_radius: f64,
    /// Per-timestep displacement cap (meters).
    pub max_step: f64,
    /// Number of timesteps per task.
    pub horizon: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        let workspace = Box3 {
            min: [0.0, 0.0, 0.0],
            max: [1.0, 1.0, 1.0],
        };
        let start_region = Box3 {
            min: [0.05, 0.3, 0.1],
            max: [0.2, 0.7, 0.4],
        };
        let target = [0.9, 0.5, 0.1];
        let horizon = 20;
        // Feasible but not trivial: 1.5x the straight-line distance from
        // the start-region center, spread over the horizon.
        let max_step = 1.5 * vec3::dist(start_region.center(), target) / horizon as f64;
        TaskConfig {
            workspace,
            obstacle: Sphere {
                center: [0.5, 0.5, 0.2],
                radius: 0.12,
            },
            target,
            start_region,
            success_radius: 0.05,
            max_step,
            horizon,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        self.workspace.validate()?;
        self.start_region.validate()?;
        if !vec3::is_finite(self.target) || !vec3::is_finite(self.obstacle.center) {
            return Err(Error::Config("non-finite task geometry".into()));
        }
        if !self.obstacle.radius.is_finite() || self.obstacle.radius < 0.0 {
            return Err(Error::Config(format!(
                "obstacle radius must be >= 0, got {}",
                self.obstacle.radius
            )));
        }
        if self.workspace.min[2] < 0.0 {
            return Err(Error::Config(
                "workspace must sit above the ground plane (min z >= 0)".into(),
            ));
        }
        if !self.workspace.contains_box(&self.start_region) {
            return Err(Error::Config("start_region must lie inside workspace".into()));
        }
        if !self.workspace.contains(self.target, 0.0) {
            return Err(Error::Config("target must lie inside workspace".into()));
        }
        if vec3::dist(self.target, self.obstacle.center) <= self.obstacle.radius {
            return Err(Error::Config("obstacle contains the target".into()));
        }
        if !(self.success_radius > 0.0) {
            return Err(Error::Config("success_radius must be > 0".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("max_step must be > 0".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        Ok(())
    }

    /// End-effector position encoded in a state.
    pub fn position_of(&self, state: &EnvState) -> Vec3 {
        vec3::sub(self.target, state.ee_to_target)
    }

    /// State features for an end-effector position.
    pub fn state_at(&self, position: Vec3) -> EnvState {
        EnvState {
            ee_to_target: vec3::sub(self.target, position),
            dist_obstacle: (vec3::dist(position, self.obstacle.center) - self.obstacle.radius)
                .max(0.0),
            height: position[2].max(0.0),
        }
    }
}

/// Sample a start state uniformly from the start region, outside the
/// obstacle.
pub fn reset(config: &TaskConfig, rng: &mut Stream) -> Result<EnvState> {
    config.validate()?;
    // A box lies strictly inside the sphere iff all its corners do.
    let all_inside = config
        .start_region
        .corners()
        .iter()
        .all(|&c| vec3::dist(c, config.obstacle.center) < config.obstacle.radius);
    if all_inside {
        return Err(Error::Config(
            "start_region lies entirely inside the obstacle".into(),
        ));
    }
    for _ in 0..10_000 {
        let p = config.start_region.sample(rng);
        if vec3::dist(p, config.obstacle.center) >= config.obstacle.radius {
            return Ok(config.state_at(p));
        }
    }
    Err(Error::Config(
        "could not sample a start outside the obstacle".into(),
    ))
}

/// Apply one action: move toward the commanded position, capped at
/// `max_step`, and recompute the state features. Pure and deterministic.
pub fn transition(state: &EnvState, action: &EnvAction, config: &TaskConfig) -> Result<EnvState> {
    action.validate()?;
    if !config.workspace.contains(action.position, 1e-9) {
        return Err(Error::Domain(format!(
            "action {:?} outside workspace",
            action.position
        )));
    }
    let current = config.position_of(state);
    let delta = vec3::sub(action.position, current);
    let step = vec3::norm(delta);
    let next = if step > config.max_step {
        vec3::add(current, vec3::scale(delta, config.max_step / step))
    } else {
        action.position
    };
    Ok(config.state_at(next))
}

/// State after the last step of a trajectory.
pub fn final_state(traj: &Trajectory, config: &TaskConfig) -> Result<EnvState> {
    let last = traj
        .steps
        .last()
        .ok_or_else(|| Error::Domain("empty trajectory".into()))?;
    transition(&last.state, &last.action, config)
}

/// Roll the policy out for the full horizon.
///
/// Actions come from `pi(a|s)` when `stochastic`, otherwise from the
/// mean `mu(s)`; either way they are clamped into the workspace before
/// the transition applies.
pub fn rollout(
    policy: &PolicyNet,
    s0: &EnvState,
    config: &TaskConfig,
    rng: &mut Stream,
    stochastic: bool,
) -> Result<Trajectory> {
    let mut state = *s0;
    let mut steps = Vec::with_capacity(config.horizon);
    for _ in 0..config.horizon {
        let raw = if stochastic {
            policy.sample_action(&state, rng)?
        } else {
            policy.mean_action(&state)?
        };
        if !vec3::is_finite(raw) {
            return Err(Error::Numerical("policy produced a non-finite action".into()));
        }
        let action = EnvAction {
            position: vec3::clamp(raw, config.workspace.min, config.workspace.max),
        };
        let next = transition(&state, &action, config)?;
        steps.push(Step { state, action });
        state = next;
    }
    Ok(Trajectory::new(TrajectorySource::RobotRollout, steps))
}

/// True iff the final end-effector position is within the success radius
/// of the target.
pub fn task_success(traj: &Trajectory, config: &TaskConfig) -> bool {
    match final_state(traj, config) {
        Ok(s) => vec3::norm(s.ee_to_target) <= config.success_radius,
        Err(_) => false,
    }
}

/// Waypoints of the expert path: the straight start-to-target line,
/// deflected through a via point above the obstacle when the line
/// passes too close.
///
/// The via point always sits on top of the keep-out shell, so every
/// demonstration takes the same route family. Side-dependent detours
/// would put starts on either side of the centerline into conflicting
/// flows, which an averaged cloned policy resolves by driving between
/// them, straight into the obstacle.
fn expert_polyline(p0: Vec3, config: &TaskConfig) -> Vec<Vec3> {
    let g = config.target;
    let clearance = 0.5 * config.obstacle.radius;
    let keep_out = config.obstacle.radius + clearance;
    let seg = vec3::sub(g, p0);
    let len2 = vec3::dot(seg, seg);
    if len2 == 0.0 {
        return vec![p0, g];
    }
    let t = (vec3::dot(vec3::sub(config.obstacle.center, p0), seg) / len2).clamp(0.0, 1.0);
    let closest = vec3::add(p0, vec3::scale(seg, t));
    if vec3::dist(closest, config.obstacle.center) >= keep_out {
        return vec![p0, g];
    }
    let via = vec3::clamp(
        vec3::add(config.obstacle.center, [0.0, 0.0, keep_out]),
        config.workspace.min,
        config.workspace.max,
    );
    vec![p0, via, g]
}

/// Point at arc-length fraction `f` (0..=1) along a polyline.
fn along_polyline(points: &[Vec3], f: f64) -> Vec3 {
    let total: f64 = points.windows(2).map(|w| vec3::dist(w[0], w[1])).sum();
    if total == 0.0 {
        return points[0];
    }
    let mut remaining = f.clamp(0.0, 1.0) * total;
    for w in points.windows(2) {
        let seg = vec3::dist(w[0], w[1]);
        if remaining <= seg || seg == 0.0 {
            if seg == 0.0 {
                continue;
            }
            return vec3::add(w[0], vec3::scale(vec3::sub(w[1], w[0]), remaining / seg));
        }
        remaining -= seg;
    }
    *points.last().unwrap()
}

/// Generate one synthetic expert demonstration from `s0`.
///
/// The expert walks the deflected line at the per-step cap, arrives a
/// few steps before the horizon, and holds at the target for the rest;
/// the hold steps absorb closed-loop lag when the demos are cloned.
/// Each commanded waypoint gets zero-mean Gaussian jitter of scale
/// `noise`. With `noise = 0` the final position is the target itself and
/// every visited state keeps positive obstacle clearance.
pub fn synth_demo(
    s0: &EnvState,
    config: &TaskConfig,
    rng: &mut Stream,
    noise: f64,
) -> Result<Trajectory> {
    if !(noise >= 0.0) {
        return Err(Error::Domain(format!("noise must be >= 0, got {noise}")));
    }
    config.validate()?;
    let p0 = config.position_of(s0);
    let polyline = expert_polyline(p0, config);
    let length: f64 = polyline.windows(2).map(|w| vec3::dist(w[0], w[1])).sum();
    let budget = config.horizon as f64 * config.max_step;
    if length > budget * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "target unreachable: expert path is {length:.4} m but the horizon allows {budget:.4} m"
        )));
    }
    let travel_steps = ((length / config.max_step - 1e-12).ceil() as usize)
        .clamp(1, config.horizon);
    let mut state = *s0;
    let mut steps = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        let mut waypoint = if t < travel_steps {
            along_polyline(&polyline, t as f64 / travel_steps as f64)
        } else {
            config.target
        };
        if noise > 0.0 {
            for v in &mut waypoint {
                let z: f64 = rng.sample(StandardNormal);
                *v += noise * z;
            }
        }
        let action = EnvAction {
            position: vec3::clamp(waypoint, config.workspace.min, config.workspace.max),
        };
        let next = transition(&state, &action, config)?;
        steps.push(Step { state, action });
        state = next;
    }
    Ok(Trajectory::new(TrajectorySource::HumanDemo, steps))
}
