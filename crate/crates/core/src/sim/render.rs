use serde::Serialize;

use super::{Scene, SimParams, Task, GRIPPER_COLOR, SIDE};
use crate::image::ImageBuf;

const GOAL_RADIUS_PX: f64 = 8.0;
const OBJECT_SIDE_PX: usize = 12;
const CROSS_LEN_PX: usize = 8;
const CROSS_WIDTH_PX: usize = 2;
/// Pixel count of the rendered object square.
pub const OBJECT_FOOTPRINT: f64 = (OBJECT_SIDE_PX * OBJECT_SIDE_PX) as f64;
/// Nominal goal disc area in pixels.
pub const GOAL_FOOTPRINT: f64 = std::f64::consts::PI * GOAL_RADIUS_PX * GOAL_RADIUS_PX;

fn fill_rect(img: &mut ImageBuf, y0: isize, x0: isize, h: usize, w: usize, rgb: [f32; 3]) {
    for y in y0.max(0)..(y0 + h as isize).min(SIDE as isize) {
        for x in x0.max(0)..(x0 + w as isize).min(SIDE as isize) {
            img.set_pixel(y as usize, x as usize, rgb);
        }
    }
}

/// Top-left pixel of a `size`-pixel span centred at unit coordinate `c`.
fn span_start(c: f64, size: usize) -> isize {
    (c * SIDE as f64 - size as f64 / 2.0).round() as isize
}

/// Rasterise the scene: background, goal disc (Push only), gripper cross,
/// then the object square on top. No anti-aliasing.
pub fn render_observation(scene: &Scene, task: Task) -> ImageBuf {
    let mut img = ImageBuf::filled(SIDE, SIDE, scene.table_background);
    if task == Task::Push {
        let (cx, cy) = (scene.goal_pos[0] * SIDE as f64, scene.goal_pos[1] * SIDE as f64);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= GOAL_RADIUS_PX * GOAL_RADIUS_PX {
                    img.set_pixel(y, x, scene.goal_color);
                }
            }
        }
    }
    let [gx, gy] = scene.gripper_pos;
    fill_rect(&mut img, span_start(gy, CROSS_WIDTH_PX), span_start(gx, CROSS_LEN_PX), CROSS_WIDTH_PX, CROSS_LEN_PX, GRIPPER_COLOR);
    fill_rect(&mut img, span_start(gy, CROSS_LEN_PX), span_start(gx, CROSS_WIDTH_PX), CROSS_LEN_PX, CROSS_WIDTH_PX, GRIPPER_COLOR);
    let [ox, oy] = scene.object_pos;
    fill_rect(&mut img, span_start(oy, OBJECT_SIDE_PX), span_start(ox, OBJECT_SIDE_PX), OBJECT_SIDE_PX, OBJECT_SIDE_PX, scene.object_color);
    img
}

/// Segmentation result for one target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    /// Mask centroid in unit coordinates; `None` for an empty mask.
    pub pos: Option<[f64; 2]>,
    /// Matched pixels over the nominal footprint, capped at 1.
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Perception {
    pub object: Estimate,
    pub goal: Estimate,
}

fn segment(obs: &ImageBuf, color: [f32; 3], tau: f64, footprint: f64) -> Estimate {
    let (mut n, mut sx, mut sy) = (0usize, 0.0f64, 0.0f64);
    let tau2 = tau * tau;
    for (i, px) in obs.data().chunks_exact(3).enumerate() {
        let d2: f64 = px.iter().zip(&color).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum();
        if d2 < tau2 {
            n += 1;
            sx += (i % obs.width()) as f64 + 0.5;
            sy += (i / obs.width()) as f64 + 0.5;
        }
    }
    if n == 0 {
        return Estimate {
            pos: None,
            confidence: 0.0,
        };
    }
    Estimate {
        pos: Some([sx / n as f64 / obs.width() as f64, sy / n as f64 / obs.height() as f64]),
        confidence: (n as f64 / footprint).min(1.0),
    }
}

/// Colour-segment the object and goal in `obs`.
pub fn perceive(obs: &ImageBuf, scene: &Scene, params: &SimParams) -> Perception {
    Perception {
        object: segment(obs, scene.object_color, params.tau_c, OBJECT_FOOTPRINT),
        goal: segment(obs, scene.goal_color, params.tau_c, GOAL_FOOTPRINT),
    }
}

/// Target estimates carried across frames. The object follows its latest
/// detection; the static goal keeps the most confident detection so far.
/// Before any detection both sit at the image centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tracker {
    pub object: [f64; 2],
    pub goal: [f64; 2],
    pub object_confidence: f64,
    pub goal_confidence: f64,
}

impl Default for Tracker {
    fn default() -> Self {
        Self {
            object: [0.5, 0.5],
            goal: [0.5, 0.5],
            object_confidence: 0.0,
            goal_confidence: 0.0,
        }
    }
}

impl Tracker {
    pub fn update(&mut self, p: &Perception) {
        if let Some(pos) = p.object.pos {
            self.object = pos;
        }
        self.object_confidence = p.object.confidence;
        if let Some(pos) = p.goal.pos {
            if p.goal.confidence >= self.goal_confidence {
                self.goal = pos;
                self.goal_confidence = p.goal.confidence;
            }
        }
    }
}
