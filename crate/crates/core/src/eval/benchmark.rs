//! Exploration benchmark: every method runs from the same starts with the
//! same per-run seeds; metrics are averaged per start, then over starts.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::explore::{explore_vmsr, run_baseline, BaselineKind, LatentSource};
use super::metrics::{compute_adt, compute_collision_rate, compute_max_distance};
use crate::error::{Error, Result};
use crate::pipeline::SubroutineModel;
use crate::rng::{rng_from, tag};
use crate::sim::agent::random_pose;
use crate::sim::{AgentConfig, MazeMap, Pose, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub n_starts: usize,
    pub runs_per_start: usize,
    pub episode_length: usize,
    pub horizon: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            n_starts: 100,
            runs_per_start: 5,
            episode_length: 408,
            horizon: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vmsr(LatentSource),
    Baseline(BaselineKind),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Vmsr(LatentSource::Affordance) => "vmsr",
            Method::Vmsr(LatentSource::Uniform) => "vmsr_uniform_z",
            Method::Baseline(k) => k.name(),
        }
    }
}

/// A method together with the policy it needs, if any.
#[derive(Debug, Clone, Copy)]
pub struct Entry<'a> {
    pub method: Method,
    pub model: Option<&'a SubroutineModel>,
    /// Interaction samples spent to obtain the policy.
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub map_id: usize,
    pub start_id: usize,
    pub run: usize,
    pub adt: f64,
    pub max_distance: f64,
    pub collisions: usize,
    pub forwards: usize,
}

impl RunRecord {
    pub fn collision_rate(&self) -> f64 {
        if self.forwards == 0 {
            0.0
        } else {
            self.collisions as f64 / self.forwards as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Adt,
    MaxDistance,
    CollisionRate,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Adt, Metric::MaxDistance, Metric::CollisionRate];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Adt => "adt",
            Metric::MaxDistance => "max_distance",
            Metric::CollisionRate => "collision_rate",
        }
    }

    pub fn of(self, r: &RunRecord) -> f64 {
        match self {
            Metric::Adt => r.adt,
            Metric::MaxDistance => r.max_distance,
            Metric::CollisionRate => r.collision_rate(),
        }
    }

    /// Whether smaller values are better.
    pub fn lower_is_better(self) -> bool {
        !matches!(self, Metric::MaxDistance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub spec: BenchmarkSpec,
    pub methods: Vec<(String, usize)>,
    pub records: Vec<RunRecord>,
}

/// Start poses per map, shared by every method.
pub fn benchmark_starts(maps: &[MazeMap], n_starts: usize, agent: &AgentConfig, seed: u64) -> Vec<Vec<Pose>> {
    maps.iter()
        .enumerate()
        .map(|(m, map)| {
            let clear = map.clear_cells(agent.body_radius);
            let mut rng = rng_from(seed, &[tag("benchmark-starts"), m as u64]);
            (0..n_starts).map(|_| random_pose(&clear, map, &mut rng)).collect()
        })
        .collect()
}

pub fn run_episode(entry: &Entry, map: &MazeMap, start: Pose, spec: &BenchmarkSpec, agent: &AgentConfig, rng: &mut crate::rng::Rng) -> Result<Trajectory> {
    match entry.method {
        Method::Vmsr(source) => {
            let model = entry
                .model
                .ok_or_else(|| Error::InvalidArgument(format!("{} needs a trained model", entry.method.name())))?;
            Ok(explore_vmsr(&model.arch, &model.params, map, start, spec.episode_length, spec.horizon, source, agent, rng)?.trajectory)
        }
        Method::Baseline(kind) => run_baseline(kind, map, start, spec.episode_length, agent, rng),
    }
}

pub fn episode_seed_tags(map: usize, start: usize, run: usize) -> [u64; 4] {
    [tag("episode"), map as u64, start as u64, run as u64]
}

pub fn run_exploration_benchmark(
    entries: &[Entry],
    maps: &[MazeMap],
    spec: &BenchmarkSpec,
    agent: &AgentConfig,
    seed: u64,
) -> Result<BenchmarkResult> {
    let starts = benchmark_starts(maps, spec.n_starts, agent, seed);
    let jobs: Vec<(usize, usize)> = (0..maps.len())
        .flat_map(|m| (0..spec.n_starts).map(move |s| (m, s)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(m, s)| {
            let mut out = Vec::with_capacity(entries.len() * spec.runs_per_start);
            for entry in entries {
                for run in 0..spec.runs_per_start {
                    let mut rng = rng_from(seed, &episode_seed_tags(m, s, run));
                    let traj = run_episode(entry, &maps[m], starts[m][s], spec, agent, &mut rng)?;
                    let c = compute_collision_rate(&traj);
                    out.push(RunRecord {
                        method: entry.method.name().to_string(),
                        map_id: m,
                        start_id: s,
                        run,
                        adt: compute_adt(&maps[m], &traj)?,
                        max_distance: compute_max_distance(&maps[m], &traj)?,
                        collisions: c.collisions,
                        forwards: c.forwards,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkResult {
        spec: *spec,
        methods: entries.iter().map(|e| (e.method.name().to_string(), e.n_samples)).collect(),
        records: per_job.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_samples_used: usize,
    pub n_starts: usize,
    pub adt: f64,
    pub max_distance: f64,
    pub collision_rate: f64,
    pub collisions: usize,
    pub forwards: usize,
}

impl BenchmarkResult {
    /// Per-start means of `metric` for `method`, ordered by (map, start).
    pub fn per_start(&self, method: &str, metric: Metric) -> Vec<f64> {
        let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.method == method) {
            let e = acc.entry((r.map_id, r.start_id)).or_insert((0.0, 0));
            e.0 += metric.of(r);
            e.1 += 1;
        }
        acc.values().map(|(s, n)| s / *n as f64).collect()
    }

    pub fn per_start_keys(&self, method: &str) -> Vec<(usize, usize)> {
        let keys: std::collections::BTreeSet<(usize, usize)> = self
            .records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.map_id, r.start_id))
            .collect();
        keys.into_iter().collect()
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        self.methods
            .iter()
            .map(|(m, n)| {
                let mean = |metric| {
                    let v = self.per_start(m, metric);
                    v.iter().sum::<f64>() / v.len().max(1) as f64
                };
                let (collisions, forwards) = self
                    .records
                    .iter()
                    .filter(|r| &r.method == m)
                    .fold((0, 0), |(c, f), r| (c + r.collisions, f + r.forwards));
                MethodSummary {
                    method: m.clone(),
                    n_samples_used: *n,
                    n_starts: self.per_start_keys(m).len(),
                    adt: mean(Metric::Adt),
                    max_distance: mean(Metric::MaxDistance),
                    collision_rate: mean(Metric::CollisionRate),
                    collisions,
                    forwards,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    /// Mean of `a − b`.
    pub mean_diff: f64,
    pub lo: f64,
    pub hi: f64,
    pub confidence: f64,
}

/// Percentile bootstrap of the mean paired difference `a − b`, resampling
/// pairs with replacement. `lo`/`hi` bound a two-sided interval at
/// `confidence`.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, confidence: f64, seed: u64) -> Result<PairedBootstrap> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "paired bootstrap needs equal non-empty samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mut rng = rng_from(seed, &[tag("bootstrap")]);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let alpha = 1.0 - confidence;
    Ok(PairedBootstrap {
        mean_diff: d.iter().sum::<f64>() / n as f64,
        lo: q(alpha / 2.0),
        hi: q(1.0 - alpha / 2.0),
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_maze, MazeSpec};

    #[test]
    fn bootstrap_detects_shift_and_not_noise() {
        let a: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x - 1.0).collect();
        let r = paired_bootstrap(&a, &b, 2000, 0.95, 0).unwrap();
        assert_eq!(r.mean_diff, 1.0);
        assert!(r.lo > 0.99 && r.hi < 1.01);
        let c: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        let d: Vec<f64> = (0..100).map(|i| ((i * 53) % 11) as f64).collect();
        let r = paired_bootstrap(&c, &d, 2000, 0.95, 0).unwrap();
        assert!(r.lo < 0.0 && r.hi > 0.0);
    }

    #[test]
    fn methods_share_starts_and_seeds() {
        let map = generate_maze(3, &MazeSpec { width: 60, height: 60, room_count: 3, ..MazeSpec::default() }).unwrap();
        let spec = BenchmarkSpec { n_starts: 3, runs_per_start: 2, episode_length: 30, horizon: 10 };
        let entries = [
            Entry { method: Method::Baseline(BaselineKind::Random), model: None, n_samples: 0 },
            Entry { method: Method::Baseline(BaselineKind::ForwardBias), model: None, n_samples: 0 },
        ];
        let agent = AgentConfig::default();
        let r = run_exploration_benchmark(&entries, std::slice::from_ref(&map), &spec, &agent, 11).unwrap();
        assert_eq!(r.records.len(), 2 * 3 * 2);
        let again = run_exploration_benchmark(&entries[..1], std::slice::from_ref(&map), &spec, &agent, 11).unwrap();
        assert_eq!(again.per_start("random", Metric::Adt), r.per_start("random", Metric::Adt));
        let s = r.summary();
        assert_eq!(s[0].n_starts, 3);
        assert!(s.iter().all(|m| (0.0..=1.0).contains(&m.collision_rate)));
    }
}
