//! Tensor tape with reverse-mode gradients and second-order forward sweeps.
//!
//! Per-point second derivatives are obtained by seeding the coordinate leaf
//! with a unit tangent along one axis for every point at once and running
//! [`Tape::push_forward`]. Pointwise layers then yield exactly
//! `d^2 out_i / d x_i^2`; anything that mixes points (max-pool) contributes
//! through the winning point, because the tangent moves the whole cloud.

mod check;
mod scalar;
mod tape;
mod tensor;

pub use check::{evaluate, fd_check, gradient, second_directional, FdReport, FD_STEP};
pub use scalar::{mish, softplus, Dual, DualValue, Scalar, UnaryFn, MAX_DERIVATIVE_ORDER};
pub use tape::{Jet, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("invalid tensor shape {shape:?}")]
    InvalidShape { shape: Vec<usize> },
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("gradient needs a scalar output, got shape {shape:?}")]
    NonScalarOutput { shape: Vec<usize> },
    #[error("non-finite value at node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("unsupported primitive `{primitive}`: {detail}")]
    UnsupportedPrimitive {
        primitive: &'static str,
        detail: String,
    },
    #[error("node {node} is not a leaf")]
    NotALeaf { node: usize },
    #[error("axis {axis} out of range for {dims} input columns")]
    InvalidAxis { axis: usize, dims: usize },
}
