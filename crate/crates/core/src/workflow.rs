//! The learning pipeline as stages with seeds derived from one master seed:
//! interaction collection on Einv, expert videos on Evideo, inverse model,
//! pseudo-labels and subroutines.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::expert::dataset::{generate_video_dataset, VideoDatasetSpec};
use crate::expert::VideoDataset;
use crate::pipeline::labeling::{label_stats, LabelStats};
use crate::pipeline::{
    collect_interaction_data, pseudo_label_dataset, slice_all, train_inverse_model, train_subroutines, CollectSpec,
    InteractionDataset, InverseHyper, InverseModel, InverseReport, LabeledVideo, SubroutineArch, SubroutineHyper,
    SubroutineModel, SubroutineReport,
};
use crate::rng::{derive_seed, tag};
use crate::sim::{AgentConfig, MazeMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSpec {
    pub agent: AgentConfig,
    pub collect: CollectSpec,
    pub videos: VideoDatasetSpec,
    pub inverse: InverseHyper,
    /// Clip length T in frames.
    pub horizon: usize,
    pub clip_stride: usize,
    pub n_subroutines: usize,
    pub subroutines: SubroutineHyper,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            agent: AgentConfig::default(),
            collect: CollectSpec::default(),
            videos: VideoDatasetSpec::default(),
            inverse: InverseHyper::default(),
            horizon: 10,
            clip_stride: 5,
            n_subroutines: 4,
            subroutines: SubroutineHyper::default(),
        }
    }
}

impl PipelineSpec {
    pub fn arch(&self) -> SubroutineArch {
        SubroutineArch::new(self.agent.ray_count, self.n_subroutines, self.horizon)
    }
}

/// Seed of one pipeline stage.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    derive_seed(master, &[tag(stage)])
}

pub fn collect_stage(spec: &PipelineSpec, einv: &[MazeMap], master: u64) -> Result<InteractionDataset> {
    collect_interaction_data(einv, &spec.collect, &spec.agent, stage_seed(master, "collect"))
}

pub fn video_stage(spec: &PipelineSpec, evideo: &[MazeMap], master: u64) -> Result<VideoDataset> {
    generate_video_dataset(evideo, &spec.videos, &spec.agent, stage_seed(master, "videos"))
}

pub fn inverse_stage(spec: &PipelineSpec, data: &InteractionDataset, master: u64) -> Result<(InverseModel, InverseReport)> {
    train_inverse_model(data, spec.agent.ray_count, &spec.inverse, stage_seed(master, "inverse"))
}

pub fn label_stage(inverse: &InverseModel, videos: &VideoDataset) -> Result<(Vec<LabeledVideo>, LabelStats)> {
    let labeled = pseudo_label_dataset(inverse, videos)?;
    let stats = label_stats(&labeled);
    Ok((labeled, stats))
}

pub fn subroutine_stage(spec: &PipelineSpec, labeled: &[LabeledVideo], master: u64) -> Result<(SubroutineModel, SubroutineReport)> {
    let clips = slice_all(labeled, spec.horizon, spec.clip_stride);
    train_subroutines(&clips, &spec.arch(), &spec.subroutines, stage_seed(master, "subroutines"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub inverse: InverseModel,
    pub subroutines: SubroutineModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub inverse: InverseReport,
    pub labels: LabelStats,
    pub subroutines: SubroutineReport,
}

/// Inverse model, labels and subroutines from already collected data.
pub fn train_bundle(spec: &PipelineSpec, data: &InteractionDataset, videos: &VideoDataset, master: u64) -> Result<(Bundle, BundleReport)> {
    let (inverse, inverse_report) = inverse_stage(spec, data, master)?;
    let (labeled, labels) = label_stage(&inverse, videos)?;
    let (subroutines, sub_report) = subroutine_stage(spec, &labeled, master)?;
    Ok((
        Bundle { inverse, subroutines },
        BundleReport {
            inverse: inverse_report,
            labels,
            subroutines: sub_report,
        },
    ))
}
