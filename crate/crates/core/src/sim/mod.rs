//! A 2-D push/pick tabletop with colour-segmentation perception and a
//! scripted controller. Episodes are scored by three reward aggregators
//! (cumulative, entropy-regularised discounted, goal-distance shaped) over
//! one shared trace.

mod dynamics;
mod episode;
mod render;
mod reward;

pub use dynamics::{distance, gaussian_entropy, scripted_policy, step, PolicyOutput, StepOutcome};
pub use episode::{run_episode, Agent, EpisodeResult, StepRecord};
pub use render::{perceive, render_observation, Estimate, Perception, Tracker};
pub use reward::{aggregate_ppo, aggregate_sac, aggregate_tdmpc2, ppo_sum, sac_sum, tdmpc2_sum};

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::DistortionError;
use crate::rng::rng;

/// Observation side in pixels.
pub const SIDE: usize = 128;
/// Steps per episode.
pub const EPISODE_STEPS: usize = 50;
/// Colour of the gripper cross.
pub const GRIPPER_COLOR: [f32; 3] = [0.05, 0.05, 0.05];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("trace has {got} steps, expected {expected}")]
    IncompleteTrace { got: usize, expected: usize },
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("unknown task `{0}` (push|pick)")]
    UnknownTask(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Push,
    Pick,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Push, Task::Pick];

    pub fn name(self) -> &'static str {
        match self {
            Task::Push => "push",
            Task::Pick => "pick",
        }
    }

    /// Action dimension: planar motion, plus a grip flag for Pick.
    pub fn action_dim(self) -> usize {
        match self {
            Task::Push => 2,
            Task::Pick => 3,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "push" => Ok(Task::Push),
            "pick" => Ok(Task::Pick),
            _ => Err(SimError::UnknownTask(s.to_string())),
        }
    }
}

/// Reward aggregator weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub gamma: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub eps_d: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.1,
            lambda: 0.5,
            eps_d: 0.01,
        }
    }
}

/// Simulator and controller constants. Lengths are in unit-square
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub reward: RewardParams,
    pub a_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub capture_radius: f64,
    /// RGB L2 threshold for colour segmentation.
    pub tau_c: f64,
    /// Gripper-object distance at which pushing starts.
    pub contact_radius: f64,
    pub lift_height: f64,
    pub lift_rate: f64,
    /// Push bonus radius.
    pub goal_radius: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            reward: RewardParams::default(),
            a_max: 0.05,
            sigma_min: 0.005,
            sigma_max: 0.05,
            capture_radius: 0.04,
            tau_c: 0.25,
            contact_radius: 0.06,
            lift_height: 0.2,
            lift_rate: 0.02,
            goal_radius: 0.02,
        }
    }
}

/// Full simulator state. The colours and seed are fixed for an episode;
/// positions, lift height and grasp evolve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub object_pos: [f64; 2],
    pub goal_pos: [f64; 2],
    pub gripper_pos: [f64; 2],
    pub object_z: f64,
    pub held: bool,
    pub object_color: [f32; 3],
    pub goal_color: [f32; 3],
    pub table_background: [f32; 3],
    pub scene_seed: u64,
}

/// Minimum pairwise RGB distance among object, goal, background and gripper.
pub const MIN_COLOR_SEPARATION: f32 = 0.5;

fn color_dist(a: [f32; 3], b: [f32; 3]) -> f32 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f32>().sqrt()
}

impl Scene {
    /// Initial scene for `seed`: positions in `[0.15, 0.85]`, the object at
    /// least 0.15 from the goal and 0.1 from the gripper.
    pub fn sample(seed: u64) -> Self {
        let mut r = rng(seed);
        let pos = |r: &mut crate::rng::Rng| [r.gen_range(0.15..0.85), r.gen_range(0.15..0.85)];
        let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let (object_pos, goal_pos, gripper_pos) = loop {
            let (o, g, p) = (pos(&mut r), pos(&mut r), pos(&mut r));
            if dist(o, g) >= 0.15 && dist(o, p) >= 0.1 {
                break (o, g, p);
            }
        };
        let (object_color, goal_color, table_background) = loop {
            let c: [[f32; 3]; 3] = [0, 1, 2].map(|_| [r.gen(), r.gen(), r.gen()]);
            let all = [c[0], c[1], c[2], GRIPPER_COLOR];
            let ok = (0..4).all(|i| (i + 1..4).all(|j| color_dist(all[i], all[j]) >= MIN_COLOR_SEPARATION));
            if ok {
                break (c[0], c[1], c[2]);
            }
        };
        Scene {
            object_pos,
            goal_pos,
            gripper_pos,
            object_z: 0.0,
            held: false,
            object_color,
            goal_color,
            table_background,
            scene_seed: seed,
        }
    }
}
