use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::render::Tracker;
use super::{Scene, SimParams, Task};
use crate::rng::Rng;

type V2 = [f64; 2];

fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: V2, b: V2) -> V2 {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(a: V2, s: f64) -> V2 {
    [a[0] * s, a[1] * s]
}

fn norm(a: V2) -> f64 {
    a[0].hypot(a[1])
}

fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn unit(a: V2, fallback: V2) -> V2 {
    let n = norm(a);
    if n < 1e-12 {
        fallback
    } else {
        scale(a, 1.0 / n)
    }
}

fn clip_norm(a: V2, max: f64) -> (V2, bool) {
    let n = norm(a);
    if n > max {
        (scale(a, max / n), true)
    } else {
        (a, false)
    }
}

fn clamp_unit(p: V2, lo: f64, hi: f64) -> V2 {
    [p[0].clamp(lo, hi), p[1].clamp(lo, hi)]
}

/// Task distance: object to goal for Push; for Pick the gripper-object gap
/// plus the full lift height before grasping, then the remaining lift.
pub fn distance(scene: &Scene, task: Task, params: &SimParams) -> f64 {
    match task {
        Task::Push => norm(sub(scene.object_pos, scene.goal_pos)),
        Task::Pick if scene.held => (params.lift_height - scene.object_z).max(0.0),
        Task::Pick => norm(sub(scene.gripper_pos, scene.object_pos)) + params.lift_height,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub scene: Scene,
    pub reward: f64,
    pub distance: f64,
    /// The planar action exceeded `a_max` and was scaled down.
    pub clipped: bool,
}

/// Advance one step. `action` is `[dx, dy]` for Push and `[dx, dy, grip]`
/// for Pick; missing components read as 0.
pub fn step(scene: &Scene, task: Task, action: &[f64], params: &SimParams) -> StepOutcome {
    let before = distance(scene, task, params);
    let (mv, clipped) = clip_norm([action.first().copied().unwrap_or(0.0), action.get(1).copied().unwrap_or(0.0)], params.a_max);
    let mut s = scene.clone();
    s.gripper_pos = clamp_unit(add(s.gripper_pos, mv), 0.0, 1.0);
    let mut bonus = 0.0;
    match task {
        Task::Push => {
            let gap = sub(s.object_pos, s.gripper_pos);
            if norm(gap) < params.contact_radius {
                let dir = unit(gap, unit(mv, [1.0, 0.0]));
                s.object_pos = clamp_unit(add(s.gripper_pos, scale(dir, params.contact_radius)), 0.05, 0.95);
            }
        }
        Task::Pick => {
            let grip = action.get(2).copied().unwrap_or(0.0) > 0.5;
            if s.held {
                if grip {
                    s.object_pos = s.gripper_pos;
                    s.object_z += params.lift_rate;
                    if s.object_z >= params.lift_height - 1e-9 {
                        s.object_z = params.lift_height;
                    }
                } else {
                    s.held = false;
                    s.object_z = 0.0;
                }
            } else if grip && norm(sub(s.gripper_pos, s.object_pos)) < params.capture_radius {
                s.held = true;
                s.object_pos = s.gripper_pos;
                bonus += 1.0;
            }
            if s.held && s.object_z == params.lift_height {
                bonus += 1.0;
            }
        }
    }
    let after = distance(&s, task, params);
    if task == Task::Push && after < params.goal_radius {
        bonus += 1.0;
    }
    StepOutcome {
        scene: s,
        reward: (before - after) * 10.0 + bonus,
        distance: after,
        clipped,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub action: Vec<f64>,
    pub sigma: f64,
    /// Differential entropy of the Gaussian action distribution.
    pub entropy: f64,
}

/// Entropy of an isotropic `k`-dimensional Gaussian with std `sigma`.
pub fn gaussian_entropy(k: usize, sigma: f64) -> f64 {
    0.5 * k as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln()
}

/// Noise-free controller command.
fn command(est: &Tracker, scene: &Scene, task: Task, params: &SimParams) -> Vec<f64> {
    let g = scene.gripper_pos;
    let speed = 0.9 * params.a_max;
    let toward = |target: V2| clip_norm(sub(target, g), speed).0;
    match task {
        Task::Pick => {
            if scene.held {
                return vec![0.0, 0.0, 1.0];
            }
            let d = sub(est.object, g);
            let grip = if norm(d) <= speed { 1.0 } else { 0.0 };
            let mv = toward(est.object);
            vec![mv[0], mv[1], grip]
        }
        Task::Push => {
            let o = est.object;
            let rc = params.contact_radius;
            let u = unit(sub(est.goal, o), [1.0, 0.0]);
            let n = [-u[1], u[0]];
            let rel = sub(g, o);
            let along = dot(rel, u);
            let across = dot(rel, n);
            let side = if across >= 0.0 { 1.0 } else { -1.0 };
            let target = if along > -0.5 * rc {
                if across.abs() < 1.5 * rc {
                    // In front of or beside the object: step out sideways.
                    add(o, add(scale(u, along.max(0.0)), scale(n, side * 2.0 * rc)))
                } else {
                    add(o, add(scale(n, side * 2.0 * rc), scale(u, -1.2 * rc)))
                }
            } else if across.abs() > 0.3 * rc {
                add(o, scale(u, -1.2 * rc))
            } else {
                // Aligned behind: drive the object onto the goal.
                sub(est.goal, scale(u, 0.9 * rc))
            };
            toward(target).to_vec()
        }
    }
}

/// Proportional controller on tracked estimates with Gaussian action noise
/// whose std grows as confidence falls.
pub fn scripted_policy(est: &Tracker, scene: &Scene, task: Task, params: &SimParams, rng: &mut Rng) -> PolicyOutput {
    let conf = match task {
        Task::Push => est.object_confidence.min(est.goal_confidence),
        Task::Pick => est.object_confidence,
    }
    .clamp(0.0, 1.0);
    let sigma = params.sigma_min + (1.0 - conf) * (params.sigma_max - params.sigma_min);
    let mut action = command(est, scene, task, params);
    for a in &mut action {
        let z: f64 = StandardNormal.sample(rng);
        *a += sigma * z;
    }
    PolicyOutput {
        entropy: gaussian_entropy(action.len(), sigma),
        action,
        sigma,
    }
}
