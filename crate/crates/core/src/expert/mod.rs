//! Action-free expert demonstrations: a shortest-path navigator with its own
//! kinematics walks between random point pairs and only its observations are
//! kept.

pub mod dataset;
pub mod planner;

pub use dataset::{generate_video_dataset, ClipMeta, VideoClip, VideoDataset, VideoDatasetSpec};
pub use planner::{plan_expert_path, render_video, ExpertConfig};
