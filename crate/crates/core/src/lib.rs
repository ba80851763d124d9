//! Non-parametric visual imitation.
//!
//! Representation learning and behavior learning are kept apart: an encoder
//! (fixed, or trained self-supervised with an online/target pair) maps
//! observations to embeddings, and actions are predicted by a softmin-weighted
//! average over the k nearest demonstration embeddings.
//!
//! Modules:
//! - [`data`]: demonstration frames, the `.vinn` file format, normalization and subsampling.
//! - [`encoder`]: identity / random projection / whitening encoders and the BYOL trainer.
//! - [`policy`]: exact k-NN index, locally weighted regression and the baseline policies.
//! - [`sim`]: a reach-grasp-pull environment with a scripted expert.
//! - [`eval`]: MSE reports, k and dataset-size sweeps, latency.
//! - [`serve`]: a length-prefixed TCP policy service and its client.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod encoder;
pub mod eval;
pub mod policy;
pub mod rng;
pub mod serve;
pub mod sim;

pub use data::{Action, DemoSet, Demonstration, EmbeddingMatrix, Frame, GripperState};
pub use encoder::{Encoder, EncoderKind, EncoderSpec};
pub use policy::{NeighborIndex, NeighborSet, PolicyConfig};
