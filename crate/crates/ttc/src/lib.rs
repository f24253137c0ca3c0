//! Low-rank tensor completion in tensor-train form.
//!
//! Recovers a partially observed tensor by factorizing every mode-k canonical
//! matricization `X_<k> ~= U_k V_k^T` in parallel and folding the per-mode
//! reconstructions back together. Two schemes are provided: a mode-weighted
//! baseline that blends modes with scalar balance weights, and an
//! element-weighted variant that maintains a per-entry confidence map driven
//! by the current residual. Small inputs can first be augmented to a higher
//! order (overlapping or plain block augmentation, or plain reshape) so that
//! intermediate matricizations are better balanced.

pub mod augment;
pub mod completion;
pub mod config;
pub mod error;
pub mod io;
pub mod mask;
pub mod mat;
pub mod metrics;
pub mod synth;
pub mod tensor;
pub mod wlrf;

pub use error::{Error, Result};
