//! Consistency and diversity of subroutines: coverage overlap between
//! rollouts of the same subroutine versus different subroutines from shared
//! starts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::benchmark::benchmark_starts;
use super::metrics::{coverage, trajectory_iou};
use crate::error::Result;
use crate::pipeline::rollout::{rollout_subroutine, RolloutMode};
use crate::pipeline::SubroutineModel;
use crate::rng::{rng_from, tag};
use crate::sim::{AgentConfig, MazeMap, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IouSpec {
    pub n_starts: usize,
    pub rollouts: usize,
    pub steps: usize,
    pub radius: f64,
}

impl Default for IouSpec {
    fn default() -> Self {
        IouSpec {
            n_starts: 20,
            rollouts: 8,
            steps: 10,
            radius: super::metrics::COVERAGE_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartIou {
    pub map_id: usize,
    pub start_id: usize,
    pub same: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouResult {
    pub same_mean: f64,
    pub cross_mean: f64,
    pub per_start: Vec<StartIou>,
    /// Sample rollouts for plotting: `[start][subroutine][rollout]` of the
    /// first map.
    #[serde(skip)]
    pub examples: Vec<Vec<Vec<Trajectory>>>,
}

pub fn subroutine_iou(
    model: &SubroutineModel,
    maps: &[MazeMap],
    spec: &IouSpec,
    agent: &AgentConfig,
    seed: u64,
) -> Result<IouResult> {
    let n = model.arch.n_subroutines;
    let starts = benchmark_starts(maps, spec.n_starts, agent, seed ^ tag("iou"));
    let jobs: Vec<(usize, usize)> = (0..maps.len())
        .flat_map(|m| (0..spec.n_starts).map(move |s| (m, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(m, s)| {
            let map = &maps[m];
            let mut rollouts = vec![Vec::with_capacity(spec.rollouts); n];
            let mut covers = vec![Vec::with_capacity(spec.rollouts); n];
            for (z, (rs, cs)) in rollouts.iter_mut().zip(covers.iter_mut()).enumerate() {
                for r in 0..spec.rollouts {
                    let mut rng = rng_from(seed, &[tag("iou-rollout"), m as u64, s as u64, z as u64, r as u64]);
                    let t = rollout_subroutine(&model.arch, &model.params, z, map, starts[m][s], spec.steps, RolloutMode::Sample, agent, &mut rng)?;
                    cs.push(coverage(map, &t, spec.radius));
                    rs.push(t);
                }
            }
            let (mut same, mut ns, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
            for zi in 0..n {
                for zj in zi..n {
                    for a in 0..spec.rollouts {
                        for b in 0..spec.rollouts {
                            if zi == zj && b <= a {
                                continue;
                            }
                            let v = trajectory_iou(&covers[zi][a], &covers[zj][b]);
                            if zi == zj {
                                same += v;
                                ns += 1;
                            } else {
                                cross += v;
                                nc += 1;
                            }
                        }
                    }
                }
            }
            Ok((
                StartIou {
                    map_id: m,
                    start_id: s,
                    same: same / ns.max(1) as f64,
                    cross: cross / nc.max(1) as f64,
                },
                rollouts,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = results.len().max(1) as f64;
    let same_mean = results.iter().map(|(r, _)| r.same).sum::<f64>() / k;
    let cross_mean = results.iter().map(|(r, _)| r.cross).sum::<f64>() / k;
    let mut examples = Vec::new();
    let mut per_start = Vec::with_capacity(results.len());
    for (r, rollouts) in results {
        if r.map_id == 0 && examples.len() < 3 {
            examples.push(rollouts);
        }
        per_start.push(r);
    }
    Ok(IouResult {
        same_mean,
        cross_mean,
        per_start,
        examples,
    })
}
