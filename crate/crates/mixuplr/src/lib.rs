//! Semi-supervised learning on synthetic 2-D datasets, combining
//! MixMatch-style mixup training with explicit adversarial Lipschitz
//! regularization, plus the measurement tools around it: empirical
//! Lipschitz-constant estimation, a convexity-gap audit of the mixup bound,
//! and FGSM robustness evaluation.

// Scalar domain checks are written as `!(x > 0.0)` so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod format;
pub mod lipschitz;
pub mod mixup;
pub mod net;
pub mod numeric;
pub mod optim;
pub mod plot;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
