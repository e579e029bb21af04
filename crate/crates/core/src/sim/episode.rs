use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dynamics::{scripted_policy, step};
use super::render::{perceive, render_observation, Tracker};
use super::reward::{aggregate_ppo, aggregate_sac, aggregate_tdmpc2};
use super::{Scene, SimError, SimParams, Task, EPISODE_STEPS};
use crate::distortion::{apply_distortion, frame_spec, DistortionSpec};
use crate::image::ImageBuf;
use crate::rng::rng;

/// One step of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub gripper_pos: [f64; 2],
    pub object_pos: [f64; 2],
    pub object_z: f64,
    pub held: bool,
    pub action: Vec<f64>,
    pub reward: f64,
    pub entropy: f64,
    /// Task distance after the step.
    pub distance: f64,
    pub object_confidence: f64,
    pub goal_confidence: f64,
    pub clipped: bool,
}

/// The three reward agents that score a shared trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Ppo,
    Sac,
    Tdmpc2,
}

impl Agent {
    pub const ALL: [Agent; 3] = [Agent::Ppo, Agent::Sac, Agent::Tdmpc2];

    pub fn name(self) -> &'static str {
        match self {
            Agent::Ppo => "ppo",
            Agent::Sac => "sac",
            Agent::Tdmpc2 => "tdmpc2",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Agent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Agent::ALL
            .into_iter()
            .find(|a| a.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown agent `{s}` (ppo|sac|tdmpc2)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub task: Task,
    pub scene_seed: u64,
    pub spec: Option<DistortionSpec>,
    pub trace: Vec<StepRecord>,
    pub j_ppo: f64,
    pub j_sac: f64,
    pub j_tdmpc2: f64,
    pub mean_reward: f64,
    /// Undistorted first frame.
    #[serde(skip)]
    pub reference_frame: ImageBuf,
    /// First frame as the agent saw it; the image scored for this record.
    #[serde(skip)]
    pub evaluated_frame: ImageBuf,
}

impl EpisodeResult {
    pub fn score(&self, agent: Agent) -> f64 {
        match agent {
            Agent::Ppo => self.j_ppo,
            Agent::Sac => self.j_sac,
            Agent::Tdmpc2 => self.j_tdmpc2,
        }
    }

    pub fn final_distance(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |s| s.distance)
    }

    /// Trace as a JSON array, one object per step.
    pub fn trace_json(&self) -> String {
        serde_json::to_string_pretty(&self.trace).expect("trace serializes")
    }
}

/// Run 50 steps of render, distort (frame-indexed seed), perceive, act.
/// `spec = None` runs on clean observations. Controller noise comes from
/// `policy_seed` only, so episodes that share it differ only through
/// perception.
pub fn run_episode(
    scene: &Scene,
    task: Task,
    spec: Option<&DistortionSpec>,
    params: &SimParams,
    policy_seed: u64,
) -> Result<EpisodeResult, SimError> {
    let mut state = scene.clone();
    let mut tracker = Tracker::default();
    let mut policy_rng = rng(policy_seed);
    let mut trace = Vec::with_capacity(EPISODE_STEPS);
    let mut frames = None;
    for t in 0..EPISODE_STEPS {
        let clean = render_observation(&state, task);
        let obs = match spec {
            Some(s) => apply_distortion(&clean, &frame_spec(s, t as u64))?,
            None => clean.clone(),
        };
        let p = perceive(&obs, &state, params);
        tracker.update(&p);
        if t == 0 {
            frames = Some((clean, obs));
        }
        let out = scripted_policy(&tracker, &state, task, params, &mut policy_rng);
        let next = step(&state, task, &out.action, params);
        state = next.scene;
        trace.push(StepRecord {
            t,
            gripper_pos: state.gripper_pos,
            object_pos: state.object_pos,
            object_z: state.object_z,
            held: state.held,
            action: out.action,
            reward: next.reward,
            entropy: out.entropy,
            distance: next.distance,
            object_confidence: p.object.confidence,
            goal_confidence: p.goal.confidence,
            clipped: next.clipped,
        });
    }
    let (reference_frame, evaluated_frame) = frames.expect("at least one step");
    Ok(EpisodeResult {
        task,
        scene_seed: scene.scene_seed,
        spec: spec.copied(),
        j_ppo: aggregate_ppo(&trace)?,
        j_sac: aggregate_sac(&trace, &params.reward)?,
        j_tdmpc2: aggregate_tdmpc2(&trace, &params.reward)?,
        mean_reward: trace.iter().map(|s| s.reward).sum::<f64>() / trace.len() as f64,
        trace,
        reference_frame,
        evaluated_frame,
    })
}
