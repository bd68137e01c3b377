use std::f64::consts::{PI, TAU};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::maze::MazeMap;
use crate::error::{Error, Result};

/// Number of disc positions tested along a forward move.
pub const SWEEP_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn is_valid(&self, map: &MazeMap) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && map.cell_at(self.x, self.y).is_some_and(|c| map.is_free(c))
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `to - from` wrapped into `(-π, π]`.
pub fn angle_diff(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub step_size: f64,
    pub rotation_angle: f64,
    pub body_radius: f64,
    pub ray_count: usize,
    pub fov: f64,
    pub max_range: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            step_size: 0.40,
            rotation_angle: 30f64.to_radians(),
            body_radius: 0.15,
            ray_count: 32,
            fov: 120f64.to_radians(),
            max_range: 4.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        if !(self.rotation_angle > 0.0 && self.rotation_angle < PI) {
            return Err(Error::InvalidArgument(
                "rotation_angle must lie in (0, π)".into(),
            ));
        }
        if self.ray_count < 4 {
            return Err(Error::InvalidArgument("ray_count must be at least 4".into()));
        }
        if !(self.body_radius >= 0.0 && self.fov > 0.0 && self.max_range > 0.0) {
            return Err(Error::InvalidArgument(
                "body_radius, fov and max_range must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Stay = 0,
    RotateLeft = 1,
    RotateRight = 2,
    Forward = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [
        Action::Stay,
        Action::RotateLeft,
        Action::RotateRight,
        Action::Forward,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Result<Action> {
        Action::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::format("action code", format!("{code} is not in 0..4")))
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Action::RotateLeft | Action::RotateRight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub pose: Pose,
    pub collided: bool,
}

/// Checks the disc at `SWEEP_SAMPLES` evenly spaced points of the segment,
/// ending at the destination.
pub fn sweep_is_free(map: &MazeMap, from: (f64, f64), to: (f64, f64), radius: f64) -> bool {
    (1..=SWEEP_SAMPLES).all(|i| {
        let t = i as f64 / SWEEP_SAMPLES as f64;
        let x = from.0 + (to.0 - from.0) * t;
        let y = from.1 + (to.1 - from.1) * t;
        map.disc_is_free(x, y, radius)
    })
}

/// Translates by `distance` along the heading if the swept body stays clear.
pub fn try_forward(map: &MazeMap, pose: Pose, distance: f64, radius: f64) -> StepOutcome {
    let to = (
        pose.x + distance * pose.heading.cos(),
        pose.y + distance * pose.heading.sin(),
    );
    let clear = sweep_is_free(map, (pose.x, pose.y), to, radius)
        && map.cell_at(to.0, to.1).is_some_and(|c| map.is_free(c));
    if clear {
        StepOutcome {
            pose: Pose { x: to.0, y: to.1, heading: pose.heading },
            collided: false,
        }
    } else {
        StepOutcome { pose, collided: true }
    }
}

/// Advances the agent by one action.
pub fn step(pose: Pose, action: Action, cfg: &AgentConfig, map: &MazeMap) -> Result<StepOutcome> {
    if !pose.is_valid(map) {
        return Err(Error::Contract(format!(
            "pose ({:.3}, {:.3}) is not in free space",
            pose.x, pose.y
        )));
    }
    Ok(match action {
        Action::Stay => StepOutcome { pose, collided: false },
        Action::RotateLeft => StepOutcome {
            pose: Pose::new(pose.x, pose.y, pose.heading + cfg.rotation_angle),
            collided: false,
        },
        Action::RotateRight => StepOutcome {
            pose: Pose::new(pose.x, pose.y, pose.heading - cfg.rotation_angle),
            collided: false,
        },
        Action::Forward => try_forward(map, pose, cfg.step_size, cfg.body_radius),
    })
}

/// Uniform draw over clear cell centers with a uniform heading.
pub fn random_pose(clear: &[super::maze::Cell], map: &MazeMap, rng: &mut crate::rng::Rng) -> Pose {
    let cell = clear[rng.random_range(0..clear.len())];
    let (x, y) = map.cell_center(cell);
    Pose::new(x, y, rng.random_range(0.0..TAU))
}
