//! Training-data preparation and the network's loss operators.

mod loss;
mod pairs;
mod patches;
pub mod qpatch;

pub use loss::{loss_gradient, loss_l1, loss_model, total_loss, LossBreakdown, LossWeights, EDGE_DISCARD};
pub use pairs::{augment, augment_dataset, augment_with_kernel, make_label_pair, AugmentAxis, TrainingPair, MAX_AUGMENT_DEG};
pub use patches::{extract_patches, patch_positions, patch_stride, PatchConfig, PatchDataset, PatchRecord};
