//! The run configuration: a TOML document with dotted sections. Every key is
//! optional and unknown keys are rejected.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vmsr_core::eval::AblationAxis;
use vmsr_core::hrl::{A2cHyper, InitScheme, RewardMode, TaskKind};
use vmsr_core::{BenchmarkSpec, IouSpec, MazeSpec, PipelineSpec};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub count: u64,
    /// First map seed; the split owns `seed_start..seed_start + count`.
    pub seed_start: u64,
}

impl Split {
    pub fn seeds(&self) -> Range<u64> {
        self.seed_start..self.seed_start.saturating_add(self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Splits {
    pub einv: Split,
    pub evideo: Split,
    pub eval: Split,
    pub etest: Split,
}

impl Default for Splits {
    fn default() -> Self {
        Splits {
            einv: Split { count: 4, seed_start: 1000 },
            evideo: Split { count: 6, seed_start: 2000 },
            eval: Split { count: 1, seed_start: 3000 },
            etest: Split { count: 1, seed_start: 4000 },
        }
    }
}

impl Splits {
    pub fn named(&self) -> [(&'static str, Split); 4] {
        [("einv", self.einv), ("evideo", self.evideo), ("eval", self.eval), ("etest", self.etest)]
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let named = self.named();
        for (name, s) in named {
            if s.count == 0 {
                return Err(CliError::Config(format!("split {name} has no maps")));
            }
        }
        for (i, (a, sa)) in named.iter().enumerate() {
            for (b, sb) in &named[i + 1..] {
                let (ra, rb) = (sa.seeds(), sb.seeds());
                if ra.start < rb.end && rb.start < ra.end {
                    return Err(CliError::Config(format!(
                        "splits {a} ({}..{}) and {b} ({}..{}) share map seeds",
                        ra.start, ra.end, rb.start, rb.end
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub benchmark: BenchmarkSpec,
    pub iou: IouSpec,
    /// Trajectories drawn per SVG top view.
    pub svg_runs: usize,
    /// Starts per held-out map used to score the inverse model.
    pub inverse_test_starts: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            benchmark: BenchmarkSpec::default(),
            iou: IouSpec::default(),
            svg_runs: 5,
            inverse_test_starts: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub axes: Vec<AblationAxis>,
    pub sample_budgets: Vec<usize>,
    pub clip_lengths: Vec<usize>,
    pub subroutine_counts: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            axes: AblationAxis::ALL.to_vec(),
            sample_budgets: AblationAxis::NInteractionSamples.default_grid(),
            clip_lengths: AblationAxis::ClipLength.default_grid(),
            subroutine_counts: AblationAxis::NSubroutines.default_grid(),
        }
    }
}

impl AblationConfig {
    pub fn grid(&self, axis: AblationAxis) -> Vec<usize> {
        match axis {
            AblationAxis::NInteractionSamples => self.sample_budgets.clone(),
            AblationAxis::ClipLength => self.clip_lengths.clone(),
            AblationAxis::NSubroutines => self.subroutine_counts.clone(),
            AblationAxis::AffordanceVsRandom => Vec::new(),
        }
    }

    /// Interaction samples the sample-budget sweep needs collected.
    pub fn max_budget(&self) -> usize {
        if self.axes.contains(&AblationAxis::NInteractionSamples) {
            self.sample_budgets.iter().copied().max().unwrap_or(0)
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrlConfig {
    pub task: TaskKind,
    pub reward: RewardMode,
    pub schemes: Vec<InitScheme>,
    pub seeds: Vec<u64>,
    pub interval: usize,
    pub max_steps: usize,
    pub success_threshold: f64,
    /// Also train flat single-subroutine and random policies.
    pub flat: bool,
    pub a2c: A2cHyper,
    pub point_goal_map: MazeSpec,
    pub area_goal_map: MazeSpec,
}

impl Default for HrlConfig {
    fn default() -> Self {
        HrlConfig {
            task: TaskKind::PointGoal,
            reward: RewardMode::Sparse,
            schemes: InitScheme::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            interval: 10,
            max_steps: 60,
            success_threshold: 0.8,
            flat: false,
            a2c: A2cHyper::default(),
            point_goal_map: MazeSpec {
                width: 40,
                height: 40,
                room_count: 3,
                target_room_count: 1,
                ..MazeSpec::default()
            },
            area_goal_map: MazeSpec {
                width: 60,
                height: 60,
                room_count: 4,
                target_room_count: 1,
                ..MazeSpec::default()
            },
        }
    }
}

impl HrlConfig {
    pub fn map_spec(&self, kind: TaskKind) -> MazeSpec {
        match kind {
            TaskKind::PointGoal => self.point_goal_map,
            TaskKind::AreaGoal => self.area_goal_map,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub splits: Splits,
    pub maze: MazeSpec,
    pub pipeline: PipelineSpec,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
    pub hrl: HrlConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: vmsr_core::Error| CliError::Config(e.to_string());
        self.splits.validate()?;
        self.maze.validate().map_err(bad)?;
        self.pipeline.agent.validate().map_err(bad)?;
        self.pipeline.arch().validate().map_err(bad)?;
        self.hrl.a2c.validate().map_err(bad)?;
        self.hrl.point_goal_map.validate().map_err(bad)?;
        self.hrl.area_goal_map.validate().map_err(bad)?;
        if self.pipeline.clip_stride == 0 {
            return Err(CliError::Config("pipeline.clip_stride must be positive".into()));
        }
        if self.hrl.seeds.is_empty() || self.hrl.schemes.is_empty() {
            return Err(CliError::Config("hrl needs at least one scheme and one seed".into()));
        }
        if self.hrl.interval == 0 {
            return Err(CliError::Config("hrl.interval must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
