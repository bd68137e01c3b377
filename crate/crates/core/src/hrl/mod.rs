//! Hierarchical RL fine-tuning: goal tasks, policy initialization schemes,
//! A2C training and sample-efficiency comparison.

pub mod a2c;
pub mod curves;
pub mod policy;
pub mod task;

pub use a2c::{train_a2c, A2cHyper, TrainReport};
pub use curves::{compare_sample_efficiency, LearningCurve, RatioRow};
pub use policy::{flatten, init_hierarchical_policy, HierarchicalPolicy, InitScheme, InitSources};
pub use task::{make_task, Episode, EpisodeLog, RewardMode, Task, TaskKind, TaskSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{SubroutineArch, SubroutineModel};
use crate::rng::{derive_seed, tag};

/// Seed of the initial parameters of run `seed`.
pub fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, &[tag("hrl-init")])
}

/// Trains every scheme for every seed. The policy of run `(scheme, seed)` is
/// initialized from `seed` as well.
pub fn run_hrl(
    schemes: &[InitScheme],
    arch: &SubroutineArch,
    sources: InitSources<'_>,
    task: &Task,
    hyper: &A2cHyper,
    interval: usize,
    seeds: &[u64],
) -> Result<Vec<TrainReport>> {
    let mut out = Vec::with_capacity(schemes.len() * seeds.len());
    for &scheme in schemes {
        for &seed in seeds {
            let mut policy = init_hierarchical_policy(scheme, arch, sources, interval, init_seed(seed))?;
            out.push(train_a2c(&mut policy, task, hyper, seed, scheme.name())?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatInit {
    VmsrSingleSubroutine,
    Random,
}

impl FlatInit {
    pub fn name(self) -> &'static str {
        match self {
            FlatInit::VmsrSingleSubroutine => "flat_vmsr_single_subroutine",
            FlatInit::Random => "flat_random",
        }
    }
}

/// A2C on a flat recurrent policy. `single` is a pipeline run with one
/// subroutine, required for [`FlatInit::VmsrSingleSubroutine`]; its policy
/// becomes the actor and a fresh value head is added.
pub fn train_flat_rl(
    init: FlatInit,
    single: Option<&SubroutineModel>,
    arch: &SubroutineArch,
    task: &Task,
    hyper: &A2cHyper,
    interval: usize,
    seeds: &[u64],
) -> Result<Vec<TrainReport>> {
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut flat = init_flat_policy(init, single, arch, interval, init_seed(seed))?;
        out.push(train_a2c(&mut flat, task, hyper, seed, init.name())?);
    }
    Ok(out)
}

/// Flat policy for `init`; `arch` must have exactly one subroutine.
pub fn init_flat_policy(
    init: FlatInit,
    single: Option<&SubroutineModel>,
    arch: &SubroutineArch,
    interval: usize,
    seed: u64,
) -> Result<HierarchicalPolicy> {
    if arch.n_subroutines != 1 {
        return Err(Error::InvalidArgument("a flat policy comes from a one-subroutine architecture".into()));
    }
    let policy = match init {
        FlatInit::VmsrSingleSubroutine => {
            let model = single.ok_or_else(|| Error::InvalidArgument("flat vmsr init needs a one-subroutine model".into()))?;
            init_hierarchical_policy(InitScheme::Vmsr, arch, InitSources { subroutines: Some(model), inverse: None }, interval, seed)?
        }
        FlatInit::Random => init_hierarchical_policy(InitScheme::Random, arch, InitSources::default(), interval, seed)?,
    };
    flatten(&policy)
}
