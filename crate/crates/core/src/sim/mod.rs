//! Procedural indoor simulator: layouts, agent dynamics, depth sensing and
//! geodesic distances.

pub mod agent;
pub mod geodesic;
pub mod maze;
pub mod raycast;
pub mod trajectory;

#[cfg(test)]
pub(crate) mod testutil;

pub use agent::{step, Action, AgentConfig, Pose, StepOutcome};
pub use geodesic::{geodesic_field, DistanceField};
pub use maze::{generate_maze, Cell, MazeMap, MazeSpec, RoomLabel};
pub use raycast::{observe, Observation};
pub use trajectory::Trajectory;
