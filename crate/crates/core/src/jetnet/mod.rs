//! Networks whose forward pass carries analytic input-derivative jets.
//!
//! A jet for a batch of `B` points is stored as one `[C * B, width]` tensor
//! where block `c` holds the derivative along the `c`-th variable multiset of
//! the [`JetPlan`]. Matrix products act on all blocks at once; biases only
//! touch the value block; nonlinearities and products use precomputed
//! Faa di Bruno and Leibniz tables.

pub(crate) mod activation;
mod checkpoint;
mod embedding;
mod layout;
mod network;

pub use activation::Activation;
pub use checkpoint::{config_hash, read_tensors, write_tensors, CheckpointHeader};
pub use embedding::{identity_jet, FourierFeatureMap};
pub use layout::{JetOrderSpec, JetPlan};
pub use network::{Architecture, EmbeddingConfig, Jet, Network, NetworkConfig};

/// Variable indices for one spatial dimension.
pub mod vars1 {
    pub const X: usize = 0;
    pub const T: usize = 1;
}

/// Variable indices for two spatial dimensions.
pub mod vars2 {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const T: usize = 2;
}

#[cfg(test)]
mod tests;
