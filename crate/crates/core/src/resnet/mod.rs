//! Residual MLP over the fifteen trip features.
//!
//! Layout: a dense input layer maps the features to the hidden width, then
//! `block_count` building blocks each compute `y = f(x) + x` with `f` a stack
//! of two or three dense layers (ReLU between them, none after the sum), and
//! a dense output layer produces three logits. With batch normalization on,
//! every dense layer is followed by BN before its activation; dropout follows
//! each ReLU inside a block.

mod check;
mod config;
mod io;
mod model;

pub use check::{gradcheck_case, gradcheck_suite, perturb_for_check, GradCheckCase, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use config::{ArchitectureSpec, ModelConfig, DEFAULT_DROPOUT_RATE, SWEEP_DEPTHS};
pub use io::{ModelDocument, TensorBlob, MODEL_FORMAT_VERSION};
pub use model::{labels_from_proba, Block, CheckBatch, ForwardCache, Gradients, Layer, Model};
