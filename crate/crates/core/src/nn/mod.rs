//! Small dense neural-network kernel with hand-written backward passes.
//!
//! Everything runs on [`Matrix`] (row-major `f64`, one sample per row).
//! Forward functions return whatever the matching backward needs; nothing is
//! cached inside the layers themselves.

mod activation;
mod adam;
mod batchnorm;
mod dense;
mod gradcheck;
mod loss;
mod matrix;

pub use activation::{
    check_dropout_rate, dropout_backward, dropout_forward, relu_backward, relu_forward,
    DropoutMask,
};
pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNorm, BatchNormCache, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM};
pub use dense::{DenseGrads, DenseParams};
pub use gradcheck::{grad_check, grad_check_fourth_order, relative_error, Differentiable, GradCheckReport, REL_ERROR_FLOOR};
pub use loss::{one_hot, softmax, softmax_xent};
pub use matrix::Matrix;

/// Whether a forward pass trains (batch statistics, dropout) or infers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}
