use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::symbol::SpectralSymbol;
use crate::autodiff::Tensor;
use crate::{Error, Result};

pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    Linf,
}

/// Symbol evaluated on a mode set, truncated and normalized.
#[derive(Clone, Debug)]
pub struct SpectralWeight {
    modes: Vec<Vec<f64>>,
    values: Vec<Complex64>,
    retained: Vec<bool>,
}

fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl SpectralWeight {
    /// Evaluates `symbol` on `modes`, zeroes modes with `|xi| > cutoff` and
    /// divides by `max_retained |P| + eps` under L-infinity normalization.
    pub fn build(symbol: &SpectralSymbol, modes: &[Vec<f64>], cutoff: Option<f64>, normalization: Normalization) -> Result<Self> {
        let retained: Vec<bool> = modes
            .iter()
            .map(|xi| cutoff.is_none_or(|c| norm(xi) <= c * (1.0 + 1e-12)))
            .collect();
        let raw = symbol.eval_all(modes);
        let peak = raw
            .iter()
            .zip(&retained)
            .filter(|(_, &k)| k)
            .map(|(p, _)| p.norm())
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::InvalidArgument(
                "spectral weight vanishes on every retained mode".into(),
            ));
        }
        let scale = match normalization {
            Normalization::None => 1.0,
            Normalization::Linf => 1.0 / (peak + NORM_EPS),
        };
        let values = raw
            .iter()
            .zip(&retained)
            .map(|(p, &k)| if k { p * scale } else { Complex64::new(0.0, 0.0) })
            .collect();
        Ok(Self {
            modes: modes.to_vec(),
            values,
            retained,
        })
    }

    /// Weight with explicit per-mode values, every mode retained.
    pub fn from_values(modes: Vec<Vec<f64>>, values: Vec<Complex64>) -> Result<Self> {
        if modes.len() != values.len() {
            return Err(Error::Shape(format!("{} modes but {} weight values", modes.len(), values.len())));
        }
        let retained = vec![true; modes.len()];
        Ok(Self { modes, values, retained })
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn retained_indices(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&i| self.retained[i]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Restriction to the retained modes.
    pub fn restrict(&self) -> Self {
        let idx = self.retained_indices();
        Self {
            modes: idx.iter().map(|&i| self.modes[i].clone()).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            retained: vec![true; idx.len()],
        }
    }

    /// Real and imaginary parts as row vectors for broadcasting on a tape.
    pub fn as_tensors(&self) -> (Arc<Tensor>, Arc<Tensor>) {
        (
            Arc::new(Tensor::vector(self.values.iter().map(|v| v.re).collect())),
            Arc::new(Tensor::vector(self.values.iter().map(|v| v.im).collect())),
        )
    }
}
