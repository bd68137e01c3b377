//! Interaction collection, inverse model, pseudo-labeling and subroutine
//! training.

pub mod interaction;
pub mod inverse;
pub mod labeling;
pub mod rollout;
pub mod subroutines;

pub use interaction::{collect_interaction_data, CollectSpec, InteractionDataset, InteractionSample};
pub use inverse::{train_inverse_model, InverseHyper, InverseModel, InverseReport};
pub use labeling::{pseudo_label, pseudo_label_dataset, slice_all, slice_clips, LabeledVideo, PseudoLabeledClip};
pub use rollout::{predict_affordance, rollout_subroutine, RolloutMode};
pub use subroutines::{
    train_subroutines, PreparedClip, SubroutineArch, SubroutineHyper, SubroutineModel, SubroutineReport,
};
