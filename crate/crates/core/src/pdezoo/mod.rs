//! The four benchmark problems: Burgers, Allen-Cahn, KdV and 2-D
//! Navier-Stokes in vorticity-stream form.

mod navier_stokes;
mod scalar;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use navier_stokes::{ns_initial_condition, ns_initial_spectrum, ns_mc_residual, ns_wavenumbers, NavierStokes};
pub use scalar::{
    allen_cahn_spectral_residual, burgers_spectral_residual, kdv_spectral_residual, spectral_residual, AllenCahn, Burgers,
    Kdv, ScalarPde,
};

use crate::autodiff::{Tape, Var};
use crate::jetnet::{Jet, JetOrderSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PdeProblem {
    Burgers(Burgers),
    AllenCahn(AllenCahn),
    Kdv(Kdv),
    NavierStokes(NavierStokes),
}

impl PdeProblem {
    /// Problem with default coefficients by name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "burgers" => Self::Burgers(Burgers::default()),
            "allen_cahn" | "allen-cahn" => Self::AllenCahn(AllenCahn::default()),
            "kdv" => Self::Kdv(Kdv::default()),
            "navier_stokes" | "navier-stokes" | "ns" => Self::NavierStokes(NavierStokes::default()),
            _ => return Err(Error::Config(format!("unknown pde `{name}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Burgers(_) => "burgers",
            Self::AllenCahn(_) => "allen_cahn",
            Self::Kdv(_) => "kdv",
            Self::NavierStokes(_) => "navier_stokes",
        }
    }

    pub fn scalar(&self) -> Option<&dyn ScalarPde> {
        match self {
            Self::Burgers(p) => Some(p),
            Self::AllenCahn(p) => Some(p),
            Self::Kdv(p) => Some(p),
            Self::NavierStokes(_) => None,
        }
    }

    pub fn spatial_dims(&self) -> usize {
        match self {
            Self::NavierStokes(_) => 2,
            _ => 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.spatial_dims() + 1
    }

    pub fn outputs(&self) -> usize {
        match self {
            Self::NavierStokes(_) => 2,
            _ => 1,
        }
    }

    /// Spatial interval per dimension; the domain is periodic with these
    /// periods.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Self::NavierStokes(p) => vec![p.bounds(); 2],
            _ => vec![self.scalar().expect("scalar").bounds()],
        }
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.bounds().iter().map(|(a, b)| b - a).collect()
    }

    pub fn time_bounds(&self) -> (f64, f64) {
        match self {
            Self::NavierStokes(p) => (p.t0, p.t1),
            _ => (0.0, 1.0),
        }
    }

    /// Derivatives the physical residual consumes.
    pub fn jet_spec(&self) -> JetOrderSpec {
        match self {
            Self::NavierStokes(_) => JetOrderSpec::two_d(2, true),
            _ => JetOrderSpec::one_d(self.scalar().expect("scalar").spatial_order()),
        }
    }

    /// Derivatives the Fourier-space residual consumes: the value, its time
    /// derivative and, for KdV, `u_x`.
    pub fn fourier_jet_spec(&self) -> JetOrderSpec {
        let d = self.spatial_dims();
        let order = match self {
            Self::Kdv(_) => 1,
            _ => 0,
        };
        JetOrderSpec {
            spatial_dims: d,
            max_spatial_order: order,
            time_first: true,
            mixed: false,
            extra: Vec::new(),
        }
    }

    /// Residual batches `[B, 1]`: the PDE residual, then (Navier-Stokes only)
    /// the compatibility residual `omega + lap psi`.
    pub fn physical_residuals(&self, tape: &mut Tape, d: &Derivs) -> Result<Vec<Var>> {
        match self {
            Self::NavierStokes(p) => p.residuals(tape, d),
            _ => Ok(vec![self.scalar().expect("scalar").residual(tape, d)?]),
        }
    }

    /// Uniform draw from the space-time box.
    pub fn sample_box<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let bounds = self.bounds();
        let (t0, t1) = self.time_bounds();
        let mut out = Vec::with_capacity(n * self.input_dim());
        for _ in 0..n {
            for &(a, b) in &bounds {
                out.push(a + (b - a) * rng.random::<f64>());
            }
            out.push(t0 + (t1 - t0) * rng.random::<f64>());
        }
        out
    }
}

/// Named derivative fields `[B, 1]` keyed by output and variable multiset.
#[derive(Clone, Debug, Default)]
pub struct Derivs {
    map: HashMap<(usize, Vec<usize>), Var>,
}

impl Derivs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, output: usize, c: &[usize], v: Var) {
        let mut c = c.to_vec();
        c.sort_unstable();
        self.map.insert((output, c), v);
    }

    pub fn get(&self, output: usize, c: &[usize]) -> Result<Var> {
        let mut key = c.to_vec();
        key.sort_unstable();
        self.map
            .get(&(output, key))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("missing derivative {c:?} of output {output}")))
    }

    /// Every component of every output carried by `jet`.
    pub fn from_jet(tape: &mut Tape, jet: &Jet) -> Result<Self> {
        let mut d = Self::new();
        let comps = jet.plan.components().to_vec();
        for c in &comps {
            for o in 0..jet.outputs {
                let v = jet.output(tape, o, c)?;
                d.insert(o, c, v);
            }
        }
        Ok(d)
    }
}

/// Which part of the space-time box is the computational domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainShape {
    #[default]
    Square,
    /// `|x - c| <= h (1 - s/2)` with `c, h` the interval centre and
    /// half-width and `s` the time rescaled to `[0, 1]` (1-D only).
    Triangle,
}

impl DomainShape {
    /// Spatial half-width factor of the slice at rescaled time `s`.
    pub fn width_factor(self, s: f64) -> f64 {
        match self {
            Self::Square => 1.0,
            Self::Triangle => 1.0 - 0.5 * s,
        }
    }

    /// Spatial interval of the slice at time `t`.
    pub fn slice(self, bounds: (f64, f64), time: (f64, f64), t: f64) -> (f64, f64) {
        let c = 0.5 * (bounds.0 + bounds.1);
        let h = 0.5 * (bounds.1 - bounds.0) * self.width_factor((t - time.0) / (time.1 - time.0));
        (c - h, c + h)
    }

    pub fn contains(self, bounds: (f64, f64), time: (f64, f64), x: f64, t: f64) -> bool {
        let (a, b) = self.slice(bounds, time, t);
        (a..=b).contains(&x) && (time.0..=time.1).contains(&t)
    }

    /// Area relative to the bounding box.
    pub fn area_fraction(self) -> f64 {
        match self {
            Self::Square => 1.0,
            Self::Triangle => 0.75,
        }
    }
}

#[cfg(test)]
mod tests;
