pub mod analysis;
pub mod experiment;
pub mod autodiff;
pub mod jetnet;
pub mod losses;
pub mod pdezoo;
pub mod refsolve;
pub mod spectral;
mod error;

pub use error::{Error, Result};
