//! One-axis sweeps of the pipeline, each point scored on the exploration
//! benchmark with the same starts and run seeds.

use serde::{Deserialize, Serialize};

use super::benchmark::{run_exploration_benchmark, BenchmarkResult, BenchmarkSpec, Entry, Method, Metric};
use super::explore::LatentSource;
use crate::error::{Error, Result};
use crate::expert::VideoDataset;
use crate::pipeline::{InteractionDataset, SubroutineModel};
use crate::sim::MazeMap;
use crate::workflow::{inverse_stage, label_stage, subroutine_stage, Bundle, PipelineSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    NInteractionSamples,
    ClipLength,
    NSubroutines,
    AffordanceVsRandom,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 4] = [
        AblationAxis::NInteractionSamples,
        AblationAxis::ClipLength,
        AblationAxis::NSubroutines,
        AblationAxis::AffordanceVsRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::NInteractionSamples => "n_interaction_samples",
            AblationAxis::ClipLength => "clip_length",
            AblationAxis::NSubroutines => "n_subroutines",
            AblationAxis::AffordanceVsRandom => "affordance_vs_random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ablation axis {s:?}")))
    }

    pub fn default_grid(self) -> Vec<usize> {
        match self {
            AblationAxis::NInteractionSamples => vec![5_000, 15_000, 45_000, 90_000],
            AblationAxis::ClipLength => vec![6, 10, 14],
            AblationAxis::NSubroutines => vec![2, 4, 8],
            AblationAxis::AffordanceVsRandom => Vec::new(),
        }
    }
}

pub struct AblationInputs<'a> {
    pub spec: &'a PipelineSpec,
    /// Pool of interaction samples; the default budget of `spec` is its
    /// prefix. Must hold at least the largest sample budget of the grid.
    pub interaction: &'a InteractionDataset,
    pub videos: &'a VideoDataset,
    pub eval_maps: &'a [MazeMap],
    pub bench: BenchmarkSpec,
    pub seed: u64,
    /// Bundle already trained with `spec` on the default budget; used for the
    /// grid point equal to the defaults.
    pub default_bundle: Option<&'a Bundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub value: String,
    pub n_samples: usize,
    pub result: BenchmarkResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub axis: AblationAxis,
    pub points: Vec<AblationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: String,
    pub value: String,
    pub method: String,
    pub n_samples_used: usize,
    pub metric: String,
    pub mean: f64,
    pub n_starts: usize,
}

fn bench_one(model: &SubroutineModel, sources: &[LatentSource], n_samples: usize, inputs: &AblationInputs<'_>, bench: &BenchmarkSpec) -> Result<BenchmarkResult> {
    let entries: Vec<Entry> = sources
        .iter()
        .map(|&s| Entry {
            method: Method::Vmsr(s),
            model: Some(model),
            n_samples,
        })
        .collect();
    run_exploration_benchmark(&entries, inputs.eval_maps, bench, &inputs.spec.agent, inputs.seed)
}

/// Retrains the pipeline downstream of the swept factor at every grid point
/// and benchmarks the result. Clip-length points execute subroutines for
/// their own clip length.
pub fn run_ablation(axis: AblationAxis, grid: &[usize], inputs: &AblationInputs<'_>) -> Result<AblationResult> {
    let base = inputs.spec;
    let pool = inputs.interaction.len();
    let default_n = base.collect.n_starts * base.collect.steps_per_start;
    if default_n > pool {
        return Err(Error::InvalidArgument(format!(
            "the default budget of {default_n} samples exceeds the {pool} collected"
        )));
    }
    let default_data = inputs.interaction.truncated(default_n);
    let mut points = Vec::new();
    if axis == AblationAxis::AffordanceVsRandom {
        let owned;
        let model = match inputs.default_bundle {
            Some(b) => &b.subroutines,
            None => {
                owned = train(base, &default_data, inputs)?;
                &owned.subroutines
            }
        };
        let result = bench_one(model, &[LatentSource::Affordance, LatentSource::Uniform], default_n, inputs, &inputs.bench)?;
        points.push(AblationPoint {
            value: "affordance_vs_uniform".into(),
            n_samples: default_n,
            result,
        });
        return Ok(AblationResult { axis, points });
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("empty grid for ablation axis {}", axis.name())));
    }
    for &v in grid {
        let mut spec = base.clone();
        let mut bench = inputs.bench;
        let truncated;
        let mut data = &default_data;
        match axis {
            AblationAxis::NInteractionSamples => {
                if v > pool || v == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "sample budget {v} is outside the {pool} collected samples"
                    )));
                }
                truncated = inputs.interaction.truncated(v);
                data = &truncated;
            }
            AblationAxis::ClipLength => {
                spec.horizon = v;
                bench.horizon = v;
            }
            AblationAxis::NSubroutines => spec.n_subroutines = v,
            AblationAxis::AffordanceVsRandom => unreachable!(),
        }
        let is_default = spec == *base && data.len() == default_n;
        let owned;
        let bundle = match inputs.default_bundle {
            Some(b) if is_default => b,
            _ => {
                owned = train(&spec, data, inputs)?;
                &owned
            }
        };
        let result = bench_one(&bundle.subroutines, &[LatentSource::Affordance], data.len(), inputs, &bench)?;
        points.push(AblationPoint {
            value: v.to_string(),
            n_samples: data.len(),
            result,
        });
    }
    Ok(AblationResult { axis, points })
}

fn train(spec: &PipelineSpec, data: &InteractionDataset, inputs: &AblationInputs<'_>) -> Result<Bundle> {
    let (inverse, _) = inverse_stage(spec, data, inputs.seed)?;
    let (labeled, _) = label_stage(&inverse, inputs.videos)?;
    let (subroutines, _) = subroutine_stage(spec, &labeled, inputs.seed)?;
    Ok(Bundle { inverse, subroutines })
}

pub fn ablation_rows(result: &AblationResult) -> Vec<AblationRow> {
    let mut rows = Vec::new();
    for p in &result.points {
        for s in p.result.summary() {
            for metric in Metric::ALL {
                let mean = match metric {
                    Metric::Adt => s.adt,
                    Metric::MaxDistance => s.max_distance,
                    Metric::CollisionRate => s.collision_rate,
                };
                rows.push(AblationRow {
                    axis: result.axis.name().to_string(),
                    value: p.value.clone(),
                    method: s.method.clone(),
                    n_samples_used: s.n_samples_used,
                    metric: metric.name().to_string(),
                    mean,
                    n_starts: s.n_starts,
                });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for a in AblationAxis::ALL {
            assert_eq!(AblationAxis::parse(a.name()).unwrap(), a);
        }
        assert!(AblationAxis::parse("depth").is_err());
        assert!(AblationAxis::NInteractionSamples.default_grid().contains(&45_000));
        assert_eq!(AblationAxis::ClipLength.default_grid(), vec![6, 10, 14]);
    }
}
