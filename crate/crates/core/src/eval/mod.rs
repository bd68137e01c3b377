//! Zero-shot exploration benchmark, subroutine overlap analysis and reports.

pub mod ablation;
pub mod benchmark;
pub mod explore;
pub mod iou;
pub mod metrics;
pub mod report;

pub use ablation::{ablation_rows, run_ablation, AblationAxis, AblationInputs, AblationResult, AblationRow};
pub use benchmark::{paired_bootstrap, run_exploration_benchmark, BenchmarkResult, BenchmarkSpec, Entry, Method, MethodSummary, Metric};
pub use explore::{explore_vmsr, run_baseline, BaselineKind, LatentSource};
pub use iou::{subroutine_iou, IouResult, IouSpec};
pub use metrics::{compute_adt, compute_collision_rate, compute_max_distance, coverage, trajectory_iou};
