//! Transforms, wavenumber grids, pseudo-differential symbols and weights.

mod fft;
mod grid;
mod projection;
mod symbol;
mod weight;

use std::sync::Arc;

pub use fft::{fft_real, Fft2Plan, FftPlan};
pub use grid::{fft_bins, fftfreq, sample_grid_size, SizeRange, WavenumberGrid};
pub use projection::{mode_box, positive_modes, Dft2Operator, DftOperator, McProjection};
pub use symbol::{SpectralSymbol, SymbolKind, SymbolTerm};
pub use weight::{Normalization, SpectralWeight, NORM_EPS};

use crate::autodiff::{ComplexPair, Tape, Var};
use crate::Result;

/// Unnormalized row-wise DFT of `x: [rows, n]` on the tape.
pub fn dft_forward(tape: &mut Tape, x: Var) -> Result<ComplexPair> {
    let n = tape.value(x).cols();
    let op = DftOperator::full(n)?;
    tape.linear(Arc::new(op), x)
}

/// `(|Omega|/N) Phi f` for samples `f: [rows, N]` on the tape.
pub fn mc_project(tape: &mut Tape, proj: &McProjection, f: Var) -> Result<ComplexPair> {
    tape.linear(Arc::new(proj.clone()), f)
}
