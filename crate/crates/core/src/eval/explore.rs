//! Exploration policies: affordance-driven subroutine chaining and the
//! hand-crafted baselines.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::ParamStore;
use crate::pipeline::rollout::{rollout_subroutine, sample_index, RolloutMode};
use crate::pipeline::SubroutineArch;
use crate::rng::Rng;
use crate::sim::{observe, step, Action, AgentConfig, MazeMap, Pose, Trajectory};

/// Action probabilities of the forward-biased baseline, in action-code order.
pub const FORWARD_BIAS: [f64; 4] = [0.0, 0.17, 0.17, 0.66];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    ForwardBias,
    ForwardRotateOnCollision,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::Random,
        BaselineKind::ForwardBias,
        BaselineKind::ForwardRotateOnCollision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::ForwardBias => "forward_bias",
            BaselineKind::ForwardRotateOnCollision => "forward_rotate_on_collision",
        }
    }
}

/// How the next subroutine is chosen during exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSource {
    Affordance,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exploration {
    pub trajectory: Trajectory,
    /// Number of times a subroutine was chosen.
    pub queries: usize,
}

/// Forward-bias probabilities normalized so they sum to exactly one, with
/// the residual on Forward.
pub fn forward_bias_probs() -> [f64; 4] {
    let mut p = FORWARD_BIAS;
    p[3] = 1.0 - (p[0] + p[1] + p[2]);
    p
}

/// Chains subroutines: choose `z` from the current observation, run it for
/// `horizon` steps (the last window is cut to fit), repeat.
#[allow(clippy::too_many_arguments)]
pub fn explore_vmsr(
    arch: &SubroutineArch,
    params: &ParamStore,
    map: &MazeMap,
    start: Pose,
    episode_length: usize,
    horizon: usize,
    source: LatentSource,
    agent: &AgentConfig,
    rng: &mut Rng,
) -> Result<Exploration> {
    let mut traj = Trajectory::start(start);
    let mut queries = 0;
    while traj.len() < episode_length {
        let pose = traj.last_pose();
        let z = match source {
            LatentSource::Affordance => {
                let p = arch.affordance_probs(params, &observe(&pose, agent, map))?;
                sample_index(&p, rng)
            }
            LatentSource::Uniform => rng.random_range(0..arch.n_subroutines),
        };
        queries += 1;
        let k = horizon.min(episode_length - traj.len());
        let part = rollout_subroutine(arch, params, z, map, pose, k, RolloutMode::Sample, agent, rng)?;
        traj.extend(&part);
    }
    Ok(Exploration { trajectory: traj, queries })
}

pub fn run_baseline(
    kind: BaselineKind,
    map: &MazeMap,
    start: Pose,
    episode_length: usize,
    agent: &AgentConfig,
    rng: &mut Rng,
) -> Result<Trajectory> {
    let mut traj = Trajectory::start(start);
    let bias = forward_bias_probs();
    // Rotations still owed by the rotate-on-collision policy.
    let mut pending: Vec<Action> = Vec::new();
    let turns = (PI / agent.rotation_angle).round() as i64;
    while traj.len() < episode_length {
        let action = match kind {
            BaselineKind::Random => Action::ALL[rng.random_range(0..Action::COUNT)],
            BaselineKind::ForwardBias => Action::ALL[sample_index(&bias, rng)],
            BaselineKind::ForwardRotateOnCollision => pending.pop().unwrap_or(Action::Forward),
        };
        let out = step(traj.last_pose(), action, agent, map)?;
        traj.push(action, out.pose, out.collided, None);
        if kind == BaselineKind::ForwardRotateOnCollision && out.collided {
            // A random angle in (−π, π] in whole rotation increments.
            let k = rng.random_range(-(turns - 1)..=turns);
            let a = if k > 0 { Action::RotateLeft } else { Action::RotateRight };
            pending = vec![a; k.unsigned_abs() as usize];
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::sim::{generate_maze, MazeSpec};

    fn setup() -> (MazeMap, Pose) {
        let map = generate_maze(4, &MazeSpec { width: 80, height: 80, room_count: 4, ..MazeSpec::default() }).unwrap();
        let start = crate::sim::agent::random_pose(&map.clear_cells(0.15), &map, &mut rng_from(1, &[]));
        (map, start)
    }

    #[test]
    fn forward_bias_frequencies() {
        let mut rng = rng_from(9, &[]);
        let p = forward_bias_probs();
        assert_eq!(p.iter().sum::<f64>(), 1.0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_index(&p, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        for a in 1..4 {
            let sd = (n as f64 * p[a] * (1.0 - p[a])).sqrt();
            assert!((counts[a] as f64 - n as f64 * p[a]).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn baselines_execute_exact_length() {
        let (map, start) = setup();
        let agent = AgentConfig::default();
        for kind in BaselineKind::ALL {
            let t = run_baseline(kind, &map, start, 408, &agent, &mut rng_from(2, &[])).unwrap();
            assert_eq!(t.len(), 408);
            if kind == BaselineKind::ForwardBias {
                assert!(!t.actions.contains(&Action::Stay));
            }
        }
        let t = run_baseline(BaselineKind::Random, &map, start, 2000, &agent, &mut rng_from(3, &[])).unwrap();
        assert!(t.actions.contains(&Action::Stay));
    }

    #[test]
    fn rotate_on_collision_only_turns_after_collisions() {
        let (map, start) = setup();
        let t = run_baseline(BaselineKind::ForwardRotateOnCollision, &map, start, 408, &AgentConfig::default(), &mut rng_from(4, &[])).unwrap();
        let mut turning = false;
        for i in 0..t.len() {
            let a = t.actions[i];
            if a.is_rotation() {
                assert!(turning || (i > 0 && t.collided[i - 1]));
                turning = true;
            } else {
                assert_eq!(a, Action::Forward);
                turning = false;
            }
        }
        // All actions between consecutive collisions are forward moves once
        // the rotation burst is done.
        let hits: Vec<usize> = (0..t.len()).filter(|&i| t.collided[i]).collect();
        for w in hits.windows(2) {
            let between = &t.actions[w[0] + 1..w[1]];
            let first_forward = between.iter().position(|a| *a == Action::Forward).unwrap_or(between.len());
            assert!(between[first_forward..].iter().all(|a| *a == Action::Forward));
        }
    }

    #[test]
    fn vmsr_window_arithmetic() {
        let (map, start) = setup();
        let arch = SubroutineArch::new(32, 4, 10);
        let params = arch.init(0).unwrap();
        let e = explore_vmsr(&arch, &params, &map, start, 408, 10, LatentSource::Affordance, &AgentConfig::default(), &mut rng_from(5, &[])).unwrap();
        assert_eq!(e.trajectory.len(), 408);
        assert_eq!(e.queries, 41);
        assert!(e.trajectory.subroutine.iter().all(|z| z.is_some()));
    }
}
