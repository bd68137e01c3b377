//! Random-action interaction data for the inverse model.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, tag};
use crate::sim::agent::random_pose;
use crate::sim::{observe, step, Action, AgentConfig, MazeMap, Observation, Pose};

/// Actions drawn during collection. Stay is never executed.
pub const SAMPLED_ACTIONS: [Action; 3] = [Action::RotateLeft, Action::RotateRight, Action::Forward];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSpec {
    pub n_starts: usize,
    pub steps_per_start: usize,
}

impl Default for CollectSpec {
    fn default() -> Self {
        CollectSpec {
            n_starts: 1500,
            steps_per_start: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSample {
    pub map_id: u32,
    pub start_id: u32,
    pub pose: Pose,
    pub obs: Observation,
    pub action: Action,
    pub next_obs: Observation,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionDataset {
    pub samples: Vec<InteractionSample>,
}

impl InteractionDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First `n` samples; starts are contiguous so this keeps whole starts
    /// when `n` is a multiple of the per-start step count.
    pub fn truncated(&self, n: usize) -> Self {
        InteractionDataset {
            samples: self.samples[..n.min(self.samples.len())].to_vec(),
        }
    }
}

pub const INTERACTION_MAGIC: &[u8] = b"INTERACT v1\n";

impl InteractionDataset {
    /// Magic line, ray count (u32) and sample count (u64), then per sample:
    /// map id, start id (u32), pose x, y, heading (f64), action code (u8),
    /// observation and next observation (f32 each). Little-endian throughout.
    pub fn encode(&self) -> Result<Vec<u8>> {
        let rays = self.samples.first().map_or(0, |s| s.obs.depths.len());
        let mut out = INTERACTION_MAGIC.to_vec();
        out.extend_from_slice(&(rays as u32).to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            if s.obs.depths.len() != rays || s.next_obs.depths.len() != rays {
                return Err(Error::Shape(format!("interaction samples mix ray counts ({rays} expected)")));
            }
            out.extend_from_slice(&s.map_id.to_le_bytes());
            out.extend_from_slice(&s.start_id.to_le_bytes());
            for v in [s.pose.x, s.pose.y, s.pose.heading] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(s.action.code());
            for v in s.obs.depths.iter().chain(&s.next_obs.depths) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |r: &str| Error::format("INTERACT v1", r);
        let body = bytes.strip_prefix(INTERACTION_MAGIC).ok_or_else(|| bad("missing magic header"))?;
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = body.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
        let rays = u32_at(take(4)?) as usize;
        let n = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let mut samples = Vec::with_capacity(n.min(body.len()));
        for _ in 0..n {
            let map_id = u32_at(take(4)?);
            let start_id = u32_at(take(4)?);
            let pose = Pose::new(f64_at(take(8)?), f64_at(take(8)?), f64_at(take(8)?));
            let action = Action::from_code(take(1)?[0])?;
            let mut frame = || -> Result<Observation> {
                Ok(Observation {
                    depths: take(4 * rays)?
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                })
            };
            let o = frame()?;
            let next = frame()?;
            samples.push(InteractionSample {
                map_id,
                start_id,
                pose,
                obs: o,
                action,
                next_obs: next,
            });
        }
        if pos != body.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(InteractionDataset { samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

pub fn collect_interaction_data(
    maps: &[MazeMap],
    spec: &CollectSpec,
    agent: &AgentConfig,
    seed: u64,
) -> Result<InteractionDataset> {
    if maps.is_empty() {
        return Err(Error::InvalidArgument("interaction collection needs at least one map".into()));
    }
    let clear: Vec<_> = maps.iter().map(|m| m.clear_cells(agent.body_radius)).collect();
    let per_start = (0..spec.n_starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_from(seed, &[tag("interaction"), s as u64]);
            let map_id = rng.random_range(0..maps.len());
            let map = &maps[map_id];
            let mut pose = random_pose(&clear[map_id], map, &mut rng);
            let mut obs = observe(&pose, agent, map);
            let mut out = Vec::with_capacity(spec.steps_per_start);
            for _ in 0..spec.steps_per_start {
                let action = SAMPLED_ACTIONS[rng.random_range(0..SAMPLED_ACTIONS.len())];
                let next = step(pose, action, agent, map)?.pose;
                let next_obs = observe(&next, agent, map);
                out.push(InteractionSample {
                    map_id: map_id as u32,
                    start_id: s as u32,
                    pose,
                    obs,
                    action,
                    next_obs: next_obs.clone(),
                });
                pose = next;
                obs = next_obs;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InteractionDataset {
        samples: per_start.into_iter().flatten().collect(),
    })
}
