//! Differentiable operators with reverse-mode gradients and the three
//! trained heads: suction, place, and the rotation-sensitive matcher.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod net;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod viz;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use loss::{bce_with_logits, contrastive_loss, DescriptorPair, PairSet};
pub use net::{heightmap_to_input, Network};
pub use scalar::Scalar;
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
pub use train::{
    group_place_samples, group_suction_samples, rotation_bin_accuracy, train_affordance,
    train_match, AffordanceGroup, Head, TrainHyper, TrainOutput,
};
pub use viz::{export_descriptor_visualization, mean_color_difference, RgbImage};

/// A dense per-pixel feature field [d, H, W] plus its provenance.
#[derive(Debug, Clone)]
pub struct DescriptorMap {
    pub features: Tensor<f32>,
    /// Rotation-stack index this map was computed at, if any.
    pub rotation_index: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("learn io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad file: {0}")]
    Format(String),
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("checkpoint config hash {found:#x} does not match expected {expected:#x}")]
    ConfigMismatch { expected: u64, found: u64 },
}
