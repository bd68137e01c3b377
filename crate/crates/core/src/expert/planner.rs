use std::f64::consts::TAU;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sim::agent::{sweep_is_free, try_forward};
use crate::sim::{geodesic_field, observe, AgentConfig, Cell, DistanceField, MazeMap, Observation, Pose};

/// Expert forward step lengths in meters.
pub const EXPERT_STEP_SIZES: [f64; 3] = [0.30, 0.60, 0.90];
/// Expert rotation increments in degrees.
pub const EXPERT_ROTATIONS_DEG: [f64; 4] = [40.0, 30.0, 24.0, 20.0];
/// Hard cap on planned path length.
pub const MAX_PATH_POSES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    pub step_size: f64,
    pub rotation_angle: f64,
}

impl ExpertConfig {
    pub fn sample(rng: &mut Rng) -> Self {
        ExpertConfig {
            step_size: EXPERT_STEP_SIZES[rng.random_range(0..EXPERT_STEP_SIZES.len())],
            rotation_angle: EXPERT_ROTATIONS_DEG[rng.random_range(0..EXPERT_ROTATIONS_DEG.len())]
                .to_radians(),
        }
    }

    pub fn is_listed(&self) -> bool {
        EXPERT_STEP_SIZES.contains(&self.step_size)
            && EXPERT_ROTATIONS_DEG
                .iter()
                .any(|d| d.to_radians() == self.rotation_angle)
    }

    /// Rotation increments in a full turn.
    fn turn_steps(&self) -> usize {
        (TAU / self.rotation_angle).round() as usize
    }
}

/// Greedy descent of `field` with the expert's action set. At each pose the
/// expert evaluates every reachable heading; it moves forward when the current
/// heading is the best improving one, otherwise it rotates one increment
/// toward the best heading. The walk ends within half a step of the goal
/// center, or within one step when no move improves.
pub fn plan_expert_path(
    map: &MazeMap,
    field: &DistanceField,
    start: Pose,
    goal: Cell,
    cfg: &ExpertConfig,
    body_radius: f64,
) -> Result<Vec<Pose>> {
    if !start.is_valid(map) {
        return Err(Error::Contract("expert start is not in free space".into()));
    }
    if field.get(goal) != 0.0 {
        return Err(Error::Contract("distance field is not rooted at the goal".into()));
    }
    if !field.at_point(map, start.x, start.y).is_finite() {
        return Err(Error::Unreachable(format!("goal ({}, {}) from start", goal.x, goal.y)));
    }
    let (gx, gy) = map.cell_center(goal);
    let half_turn = cfg.turn_steps() / 2;
    let mut path = vec![start];
    let mut pose = start;
    loop {
        let to_goal = pose.distance_to(gx, gy);
        if to_goal < cfg.step_size / 2.0 {
            return Ok(path);
        }
        let here = field.at_point(map, pose.x, pose.y);
        let mut best: Option<(f64, isize)> = None;
        for k in -(half_turn as isize)..=(half_turn as isize) {
            let heading = pose.heading + k as f64 * cfg.rotation_angle;
            let to = (
                pose.x + cfg.step_size * heading.cos(),
                pose.y + cfg.step_size * heading.sin(),
            );
            if !sweep_is_free(map, (pose.x, pose.y), to, body_radius) {
                continue;
            }
            let v = field.at_point(map, to.0, to.1);
            if !(v < here) {
                continue;
            }
            let better = match best {
                None => true,
                Some((bv, bk)) => v < bv || (v == bv && k.abs() < bk.abs()),
            };
            if better {
                best = Some((v, k));
            }
        }
        let next = match best {
            None if to_goal <= cfg.step_size => return Ok(path),
            None => {
                return Err(Error::Unreachable(format!(
                    "expert stuck {to_goal:.2} m from goal ({}, {})",
                    goal.x, goal.y
                )))
            }
            Some((_, 0)) => try_forward(map, pose, cfg.step_size, body_radius).pose,
            Some((_, k)) => Pose::new(pose.x, pose.y, pose.heading + k.signum() as f64 * cfg.rotation_angle),
        };
        pose = next;
        path.push(pose);
        if path.len() > MAX_PATH_POSES {
            return Err(Error::Unreachable("expert path exceeded the pose cap".into()));
        }
    }
}

/// Field rooted at `goal` on the body-inflated map, for use with
/// [`plan_expert_path`].
pub fn goal_field(inflated: &MazeMap, goal: Cell) -> Result<DistanceField> {
    geodesic_field(inflated, &[goal])
}

/// One observation per pose, seen through the agent's own sensor.
pub fn render_video(path: &[Pose], map: &MazeMap, view: &AgentConfig) -> Vec<Observation> {
    path.iter().map(|p| observe(p, view, map)).collect()
}
