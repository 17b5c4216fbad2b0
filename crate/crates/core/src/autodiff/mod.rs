//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Complex quantities are carried as [`ComplexPair`]s of real nodes. Linear
//! spectral maps enter the graph through [`LinearOperator`], whose adjoint is
//! used directly in the backward sweep.

mod adam;
mod linear;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use linear::{adjoint_mismatch, AdjointOf, DenseOperator, IdentityOperator, LinearOperator};
pub use tape::{ActivationTerm, ActivationTerms, ComplexPair, Gradients, ProductTerms, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tensor::{gemm, gemm_bt};
