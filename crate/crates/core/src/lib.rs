//! Lewis signaling games between recurrent agents over a discrete channel,
//! trained with Gumbel-Softmax relaxation, plus compositionality metrics for
//! the protocols they develop.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod agents;
pub mod error;
pub mod games;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod protocol;
pub mod scalar;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tape64 = nn::Tape<f64>;
pub type Tape32 = nn::Tape<f32>;
pub type ParamStore64 = nn::ParamStore<f64>;
pub type ParamStore32 = nn::ParamStore<f32>;
pub type Sender64 = agents::SenderAgent<f64>;
pub type Sender32 = agents::SenderAgent<f32>;
pub type Receiver64 = agents::ReceiverAgent<f64>;
pub type Receiver32 = agents::ReceiverAgent<f32>;
pub type Trained64 = games::Trained<f64>;
pub type Checkpoint64 = games::Checkpoint<f64>;
