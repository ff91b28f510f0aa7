//! End-to-end applications built on the solvers.

pub mod adaptation;
pub mod color;

pub use adaptation::{
    adaptation_clouds, cloud_cost, domain_adaptation_experiment, median_pairwise_distance, propagate_labels,
    train_classifier, AdaptationConfig, AdaptationResult, CostKind, KernelRidgeClassifier,
};
pub use color::{apply_transfer, barycentric_targets, color_transfer, color_transfer_with, ColorTransferResult};
