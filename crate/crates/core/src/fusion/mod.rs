//! Fusion of the four branches into one binary classifier.

mod head;
mod model;

pub use head::{
    Activation, Branch, BranchDims, BranchInputs, FusedRepresentation, FusionConfig, FusionHead, Prediction,
};
pub use model::{load_extractors, train_fused, FusedModel, TrainedModel};
