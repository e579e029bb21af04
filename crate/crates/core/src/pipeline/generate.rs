use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::manifest::{r6, AgentScores, EpdRecord, GenerateConfig, Manifest, MANIFEST_FORMAT};
use super::split::split;
use super::PipelineError;
use crate::distortion::{DistortionKind, DistortionSpec};
use crate::metrics::normalize_scores;
use crate::rng::derive;
use crate::sim::{run_episode, Agent, EpisodeResult, Scene, SimParams, Task};

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub scenes: usize,
    pub tasks: Vec<Task>,
    pub kinds: Vec<DistortionKind>,
    pub levels: Vec<u8>,
    pub seed: u64,
    pub sim: SimParams,
    /// Also write every step trace to `traces/{id}.json`.
    pub write_traces: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            scenes: 5,
            tasks: Task::ALL.to_vec(),
            kinds: DistortionKind::ALL.to_vec(),
            levels: vec![1, 2, 3, 4, 5],
            seed: 0,
            sim: SimParams::default(),
            write_traces: false,
        }
    }
}

fn task_id(t: Task) -> u64 {
    match t {
        Task::Push => 0,
        Task::Pick => 1,
    }
}

fn kind_id(k: DistortionKind) -> u64 {
    DistortionKind::ALL.iter().position(|&x| x == k).expect("catalog kind") as u64
}

pub(crate) fn scene_seed(master: u64, task: Task, scene: usize) -> u64 {
    derive(master, &[1, task_id(task), scene as u64])
}

fn policy_seed(scene_seed: u64, task: Task) -> u64 {
    derive(scene_seed, &[task_id(task)])
}

fn distortion_seed(master: u64, task: Task, scene: usize, kind: DistortionKind, level: u8) -> u64 {
    derive(master, &[2, task_id(task), scene as u64, kind_id(kind), level as u64])
}

pub(crate) fn record_id(task: Task, scene: usize, kind: DistortionKind, level: u8) -> String {
    format!("{task}_{scene}_{kind}_{level}")
}

/// Re-run the episode behind `record` from the manifest's seeds.
pub fn replay_episode(config: &GenerateConfig, record: &EpdRecord) -> Result<EpisodeResult, PipelineError> {
    let scene = Scene::sample(record.scene_seed);
    Ok(run_episode(&scene, record.task, Some(&record.spec), &config.sim, policy_seed(record.scene_seed, record.task))?)
}

struct Cell {
    task: Task,
    scene: usize,
    kind: DistortionKind,
    level: u8,
}

fn run_cell(opts: &GenerateOptions, c: &Cell, out: &Path) -> Result<EpdRecord, PipelineError> {
    let id = record_id(c.task, c.scene, c.kind, c.level);
    let seed = scene_seed(opts.seed, c.task, c.scene);
    let spec = DistortionSpec::new(c.kind, c.level, distortion_seed(opts.seed, c.task, c.scene, c.kind, c.level))?;
    let ep = run_episode(&Scene::sample(seed), c.task, Some(&spec), &opts.sim, policy_seed(seed, c.task))?;
    let ref_path = format!("ref/{id}.png");
    let dist_path = format!("dist/{id}.png");
    ep.reference_frame.write_png(&out.join(&ref_path))?;
    ep.evaluated_frame.write_png(&out.join(&dist_path))?;
    if opts.write_traces {
        let p = out.join(format!("traces/{id}.json"));
        std::fs::write(&p, ep.trace_json()).map_err(|e| PipelineError::io(&p, e))?;
    }
    Ok(EpdRecord {
        id,
        task: c.task,
        scene: c.scene,
        scene_seed: seed,
        spec,
        ref_path,
        dist_path,
        height: ep.evaluated_frame.height(),
        width: ep.evaluated_frame.width(),
        agent_scores: AgentScores {
            ppo: r6(ep.j_ppo),
            sac: r6(ep.j_sac),
            tdmpc2: r6(ep.j_tdmpc2),
        },
        agent_dmos: AgentScores::default(),
        task_score: 0.0,
        dmos: 0.0,
        dmos_all: 0.0,
        mean_reward: r6(ep.mean_reward),
        final_distance: r6(ep.final_distance()),
        split: None,
    })
}

fn normalized(raw: &[f64], group: String) -> Result<Vec<f64>, PipelineError> {
    normalize_scores(raw, 0.0, 5.0)
        .map(|v| v.into_iter().map(r6).collect())
        .map_err(|_| PipelineError::Degenerate { group, value: raw[0] })
}

/// Per-task, per-agent normalisation; task score; per-task dmos; pooled
/// score over cells shared across tasks.
fn annotate(records: &mut [EpdRecord], tasks: &[Task]) -> Result<(), PipelineError> {
    for &task in tasks {
        let idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].task == task).collect();
        for agent in Agent::ALL {
            let raw: Vec<f64> = idx.iter().map(|&i| records[i].agent_scores.get(agent)).collect();
            let norm = normalized(&raw, format!("{task}/{agent}"))?;
            for (&i, v) in idx.iter().zip(norm) {
                records[i].agent_dmos.set(agent, v);
            }
        }
        for &i in &idx {
            records[i].task_score = r6(records[i].agent_dmos.mean());
        }
        let scores: Vec<f64> = idx.iter().map(|&i| records[i].task_score).collect();
        for (&i, v) in idx.iter().zip(normalized(&scores, format!("{task}/task_score"))?) {
            records[i].dmos = v;
        }
    }
    let mut cells: BTreeMap<(usize, DistortionKind, u8), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        cells.entry((r.scene, r.spec.kind, r.spec.level)).or_default().push(i);
    }
    let groups: Vec<&Vec<usize>> = cells.values().collect();
    let means: Vec<f64> = groups.iter().map(|g| r6(g.iter().map(|&i| records[i].dmos).sum::<f64>() / g.len() as f64)).collect();
    for (g, v) in groups.iter().zip(normalized(&means, "pooled".into())?) {
        for &i in g.iter() {
            records[i].dmos_all = v;
        }
    }
    Ok(())
}

/// Run every (task, scene, kind, level) episode, write the reference and
/// distorted first frames, annotate scores and apply the default split
/// (seeded with the master seed). The manifest is written last; on failure
/// the image directories are removed.
pub fn generate(opts: &GenerateOptions, out: &Path) -> Result<Manifest, PipelineError> {
    if opts.scenes < 2 {
        return Err(PipelineError::Invalid(format!("need at least 2 scenes, got {}", opts.scenes)));
    }
    if opts.tasks.is_empty() || opts.kinds.is_empty() || opts.levels.is_empty() {
        return Err(PipelineError::Invalid("tasks, kinds and levels must be non-empty".into()));
    }
    let mut subdirs = vec!["ref", "dist"];
    if opts.write_traces {
        subdirs.push("traces");
    }
    for d in &subdirs {
        let p = out.join(d);
        std::fs::create_dir_all(&p).map_err(|e| PipelineError::io(&p, e))?;
    }
    let result = (|| {
        let mut cells = Vec::new();
        for &task in &opts.tasks {
            for scene in 0..opts.scenes {
                for &kind in &opts.kinds {
                    for &level in &opts.levels {
                        cells.push(Cell { task, scene, kind, level });
                    }
                }
            }
        }
        let mut records: Vec<EpdRecord> = cells.par_iter().map(|c| run_cell(opts, c, out)).collect::<Result<_, _>>()?;
        annotate(&mut records, &opts.tasks)?;
        let mut manifest = Manifest {
            format: MANIFEST_FORMAT,
            config: GenerateConfig {
                scenes: opts.scenes,
                tasks: opts.tasks.clone(),
                kinds: opts.kinds.clone(),
                levels: opts.levels.clone(),
                seed: opts.seed,
                sim: opts.sim,
            },
            records,
            split: None,
        };
        split(&mut manifest, opts.seed)?;
        manifest.save(out)?;
        Ok(manifest)
    })();
    if result.is_err() {
        for d in &subdirs {
            let _ = std::fs::remove_dir_all(out.join(d));
        }
    }
    result
}
