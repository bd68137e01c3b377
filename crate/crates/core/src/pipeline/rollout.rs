//! Closed-loop execution of a learned subroutine in the simulator.

use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use super::subroutines::SubroutineArch;
use crate::error::{Error, Result};
use crate::nn::loss::{argmax, softmax};
use crate::nn::ParamStore;
use crate::rng::Rng;
use crate::sim::{observe, step, Action, AgentConfig, MazeMap, Observation, Pose, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    Sample,
    Greedy,
}

pub fn predict_affordance(arch: &SubroutineArch, params: &ParamStore, obs: &Observation) -> Result<Vec<f64>> {
    arch.affordance_probs(params, obs)
}

/// Draws an index from a probability vector.
pub fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    match WeightedIndex::new(probs) {
        Ok(d) => d.sample(rng),
        Err(_) => argmax(probs),
    }
}

/// Runs subroutine `z` for `k` steps from `pose` with a fresh hidden state.
#[allow(clippy::too_many_arguments)]
pub fn rollout_subroutine(
    arch: &SubroutineArch,
    params: &ParamStore,
    z: usize,
    map: &MazeMap,
    pose: Pose,
    k: usize,
    mode: RolloutMode,
    agent: &AgentConfig,
    rng: &mut Rng,
) -> Result<Trajectory> {
    if z >= arch.n_subroutines {
        return Err(Error::InvalidArgument(format!(
            "subroutine {z} out of range for {} subroutines",
            arch.n_subroutines
        )));
    }
    let zv = arch.one_hot(z);
    let mut traj = Trajectory::start(pose);
    let mut h = vec![0.0; arch.hidden];
    let mut pose = pose;
    for _ in 0..k {
        let obs = observe(&pose, agent, map).to_f64();
        let (logits, h2) = arch.policy_step(params, &obs, &zv, &h)?;
        h = h2;
        let a = match mode {
            RolloutMode::Greedy => argmax(&logits),
            RolloutMode::Sample => sample_index(&softmax(&logits), rng),
        };
        let action = Action::ALL[a];
        let out = step(pose, action, agent, map)?;
        pose = out.pose;
        traj.push(action, pose, out.collided, Some(z as u8));
    }
    Ok(traj)
}
