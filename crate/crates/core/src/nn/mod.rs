//! Minimal numerical core: parameter stores, a vector-level tape with
//! reverse-mode adjoints, Gumbel-Softmax sampling, Adam, gradient checking
//! and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod gumbel;
pub(crate) mod kernels;
pub mod params;
pub mod tape;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{grad_check, GradCheckConfig, HasParams};
pub use gumbel::{gumbel_noise, gumbel_softmax_sample};
pub use kernels::argmax;
pub use params::{Param, ParamKey, ParamStore, Shape};
pub use tape::{Gradients, NodeId, RnnKeys, Tape};
