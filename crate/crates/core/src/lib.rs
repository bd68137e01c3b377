//! Learning navigation subroutines and an affordance model from action-free
//! expert trajectories, and evaluating them on exploration and hierarchical RL.

pub mod error;
pub mod eval;
pub mod expert;
pub mod hrl;
pub mod rng;
pub mod nn;
pub mod pipeline;
pub mod sim;
pub mod workflow;

pub use error::{Error, Result};
pub use eval::{BaselineKind, BenchmarkSpec, IouSpec, LatentSource, Metric};
pub use expert::{VideoDataset, VideoDatasetSpec};
pub use hrl::{A2cHyper, InitScheme, LearningCurve, RewardMode, TaskKind, TaskSpec};
pub use nn::ParamStore;
pub use pipeline::{CollectSpec, InteractionDataset, InverseHyper, InverseModel, SubroutineArch, SubroutineHyper, SubroutineModel};
pub use sim::{Action, AgentConfig, MazeMap, MazeSpec, Observation, Pose, Trajectory};
pub use workflow::{Bundle, PipelineSpec};
