use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::layout::JetPlan;
use crate::autodiff::Tensor;
use crate::{Error, Result};

/// Frozen random Fourier features `(sin(2 pi B p), cos(2 pi B p))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFeatureMap {
    /// Row-major `[m, input_dim]`.
    b: Vec<f64>,
    m: usize,
    input_dim: usize,
    sigma: f64,
}

impl FourierFeatureMap {
    pub fn sample<R: Rng + ?Sized>(m: usize, input_dim: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        if !(sigma >= 0.0) || m == 0 {
            return Err(Error::InvalidArgument(format!("fourier features need m > 0 and sigma >= 0 (m={m}, sigma={sigma})")));
        }
        let b = if sigma == 0.0 {
            vec![0.0; m * input_dim]
        } else {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            (0..m * input_dim).map(|_| normal.sample(rng)).collect()
        };
        Ok(Self { b, m, input_dim, sigma })
    }

    pub fn from_matrix(b: Vec<f64>, m: usize, input_dim: usize, sigma: f64) -> Result<Self> {
        if b.len() != m * input_dim {
            return Err(Error::Shape(format!("B has {} entries, expected {m}x{input_dim}", b.len())));
        }
        Ok(Self { b, m, input_dim, sigma })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.b
    }

    pub fn features(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        2 * self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Feature values and their exact input derivatives, stacked by jet
    /// component: `[plan.len() * batch, 2m]`.
    ///
    /// The phase `a = 2 pi B p` is affine in `p`, so a derivative along the
    /// multiset `c` is `sin(a + |c| pi/2) * prod_j 2 pi B[:, c_j]`.
    pub fn embed(&self, points: &[f64], plan: &JetPlan) -> Result<Tensor> {
        let d = self.input_dim;
        if points.len() % d != 0 || plan.nvars() != d {
            return Err(Error::Shape(format!(
                "points of dimension {d} expected (plan has {} variables)",
                plan.nvars()
            )));
        }
        let batch = points.len() / d;
        let (m, w) = (self.m, 2 * self.m);
        let mut out = vec![0.0; plan.len() * batch * w];
        for (ci, comp) in plan.components().iter().enumerate() {
            let k = comp.len() as f64;
            for i in 0..m {
                let factor: f64 = comp.iter().map(|&v| 2.0 * PI * self.b[i * d + v]).product();
                for r in 0..batch {
                    let a: f64 = (0..d).map(|j| 2.0 * PI * self.b[i * d + j] * points[r * d + j]).sum();
                    let shifted = a + k * PI / 2.0;
                    let row = (ci * batch + r) * w;
                    out[row + i] = factor * shifted.sin();
                    out[row + m + i] = factor * shifted.cos();
                }
            }
        }
        Ok(Tensor::matrix(plan.len() * batch, w, out))
    }
}

/// Raw coordinates as a stacked jet: the value block holds the points, each
/// first-order block the matching unit vector, higher blocks zero.
pub fn identity_jet(points: &[f64], plan: &JetPlan) -> Result<Tensor> {
    let d = plan.nvars();
    if points.len() % d != 0 {
        return Err(Error::Shape(format!("points not divisible by dimension {d}")));
    }
    let batch = points.len() / d;
    let mut out = vec![0.0; plan.len() * batch * d];
    out[..batch * d].copy_from_slice(points);
    for (ci, comp) in plan.components().iter().enumerate() {
        if comp.len() == 1 {
            for r in 0..batch {
                out[(ci * batch + r) * d + comp[0]] = 1.0;
            }
        }
    }
    Ok(Tensor::matrix(plan.len() * batch, d, out))
}
