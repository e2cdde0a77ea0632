//! Point-cloud network mapping stacked coordinates and frequency to
//! scattered pressure.
//!
//! A local extractor (two T-Net feature transforms around shared-kernel
//! MLPs) produces `S_L` per point; a global extractor max-pools each domain
//! cloud into `S_G`. Together with the encoded implicit quantities `S_p` they
//! form the width-210 criteria sequence fed to one head per domain.

mod checkpoint;
mod implicit;
mod layers;
mod model;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint, save_checkpoint,
    write_checkpoint, CHECKPOINT_VERSION,
};
pub use implicit::{encode_implicit, ImplicitCode, ImplicitStats, IMPLICIT_WIDTH};
pub use layers::{
    feature_transform, global_extractor, local_extractor, matrix_mlp, transform_matrix, Dense,
    FeatureTransform, LocalExtractor, Mlp, Network,
};
pub use model::{
    channels_to_complex, criteria_solver, forward, init_params, stack_quantities, Architecture,
    Forward, InputNormalization, ModelParams, StackedPointCloud, CRITERIA_WIDTH, GLOBAL_WIDTH,
    HEAD_WIDTHS, LOCAL_WIDTH,
};

pub use crate::autodiff::mish;

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{op}: expected width {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("implicit quantity {index} has zero spread over the training set")]
    DegenerateStats { index: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite {0}")]
    NonFiniteInput(&'static str),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
