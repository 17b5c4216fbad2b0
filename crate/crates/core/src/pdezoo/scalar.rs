use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Derivs;
use crate::autodiff::{Tape, Var};
use crate::Result;

const X: usize = 0;
const T: usize = 1;

/// A periodic scalar PDE `u_t + L u + N(u) = 0` in one space dimension.
///
/// In Fourier space the residual is `u_t^ + m_lin(xi) u^ + m_nl(xi) n^` where
/// `n` is the pointwise nonlinear field, so the physical and spectral forms
/// share their coefficients.
pub trait ScalarPde: Send + Sync {
    fn bounds(&self) -> (f64, f64);

    /// Highest spatial derivative in the physical residual.
    fn spatial_order(&self) -> usize;

    fn initial(&self, x: f64) -> f64;

    /// `u_t + ...` from the derivative fields of output 0.
    fn residual(&self, tape: &mut Tape, d: &Derivs) -> Result<Var>;

    /// Whether [`ScalarPde::nonlinear_field`] needs `u_x`.
    fn nonlinear_needs_ux(&self) -> bool {
        false
    }

    /// The pointwise field `n` that is transformed for the nonlinear term.
    fn nonlinear_field(&self, tape: &mut Tape, u: Var, ux: Option<Var>) -> Result<Var>;

    /// Same as [`ScalarPde::nonlinear_field`] on plain values.
    fn nonlinear_values(&self, u: &[f64], ux: &[f64]) -> Vec<f64>;

    /// Polynomial degree of `n` in `u` (sets the dealiasing padding).
    fn nonlinear_degree(&self) -> usize {
        2
    }

    /// `(m_lin, m_nl)` at wavenumber `xi` (cycles per unit length).
    fn multipliers(&self, xi: f64) -> (Complex64, Complex64);
}

/// `u_t^ + m_lin u^ + m_nl n^` mode by mode.
pub fn spectral_residual(pde: &dyn ScalarPde, u_hat: &[Complex64], ut_hat: &[Complex64], n_hat: &[Complex64], xi: &[f64]) -> Vec<Complex64> {
    xi.iter()
        .enumerate()
        .map(|(k, &x)| {
            let (ml, mn) = pde.multipliers(x);
            ut_hat[k] + ml * u_hat[k] + mn * n_hat[k]
        })
        .collect()
}

pub fn burgers_spectral_residual(u_hat: &[Complex64], ut_hat: &[Complex64], u2_hat: &[Complex64], xi: &[f64], nu: f64) -> Vec<Complex64> {
    spectral_residual(&Burgers { nu }, u_hat, ut_hat, u2_hat, xi)
}

pub fn allen_cahn_spectral_residual(
    u_hat: &[Complex64],
    ut_hat: &[Complex64],
    u3_hat: &[Complex64],
    xi: &[f64],
    alpha: f64,
    reaction: f64,
) -> Vec<Complex64> {
    spectral_residual(&AllenCahn { alpha, reaction }, u_hat, ut_hat, u3_hat, xi)
}

pub fn kdv_spectral_residual(u_hat: &[Complex64], ut_hat: &[Complex64], uux_hat: &[Complex64], xi: &[f64], delta2: f64) -> Vec<Complex64> {
    let pde = Kdv {
        delta2,
        ..Kdv::default()
    };
    spectral_residual(&pde, u_hat, ut_hat, uux_hat, xi)
}

/// `u_t + u u_x - nu u_xx = 0` on `[-1, 1]`, `u(x, 0) = -sin(pi x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Burgers {
    pub nu: f64,
}

impl Default for Burgers {
    fn default() -> Self {
        Self { nu: 0.01 / PI }
    }
}

impl ScalarPde for Burgers {
    fn bounds(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn spatial_order(&self) -> usize {
        2
    }

    fn initial(&self, x: f64) -> f64 {
        -(PI * x).sin()
    }

    fn residual(&self, tape: &mut Tape, d: &Derivs) -> Result<Var> {
        let (u, ut, ux, uxx) = (d.get(0, &[])?, d.get(0, &[T])?, d.get(0, &[X])?, d.get(0, &[X, X])?);
        let adv = tape.mul(u, ux)?;
        let visc = tape.scale(uxx, -self.nu);
        let r = tape.add(ut, adv)?;
        tape.add(r, visc)
    }

    fn nonlinear_field(&self, tape: &mut Tape, u: Var, _ux: Option<Var>) -> Result<Var> {
        Ok(tape.square(u))
    }

    fn nonlinear_values(&self, u: &[f64], _ux: &[f64]) -> Vec<f64> {
        u.iter().map(|v| v * v).collect()
    }

    fn multipliers(&self, xi: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(4.0 * PI * PI * self.nu * xi * xi, 0.0),
            Complex64::new(0.0, PI * xi),
        )
    }
}

/// `u_t - alpha u_xx + r (u^3 - u) = 0` on `[-1, 1]`, `u(x, 0) = x^2 cos(pi x)`,
/// with reaction rate `r = 5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllenCahn {
    pub alpha: f64,
    pub reaction: f64,
}

impl Default for AllenCahn {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            reaction: 5.0,
        }
    }
}

impl ScalarPde for AllenCahn {
    fn bounds(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn spatial_order(&self) -> usize {
        2
    }

    fn initial(&self, x: f64) -> f64 {
        x * x * (PI * x).cos()
    }

    fn residual(&self, tape: &mut Tape, d: &Derivs) -> Result<Var> {
        let (u, ut, uxx) = (d.get(0, &[])?, d.get(0, &[T])?, d.get(0, &[X, X])?);
        let cube = tape.powi(u, 3);
        let react = tape.sub(cube, u)?;
        let react = tape.scale(react, self.reaction);
        let diff = tape.scale(uxx, -self.alpha);
        let r = tape.add(ut, diff)?;
        tape.add(r, react)
    }

    fn nonlinear_field(&self, tape: &mut Tape, u: Var, _ux: Option<Var>) -> Result<Var> {
        Ok(tape.powi(u, 3))
    }

    fn nonlinear_values(&self, u: &[f64], _ux: &[f64]) -> Vec<f64> {
        u.iter().map(|v| v * v * v).collect()
    }

    fn nonlinear_degree(&self) -> usize {
        3
    }

    fn multipliers(&self, xi: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(4.0 * PI * PI * self.alpha * xi * xi - self.reaction, 0.0),
            Complex64::new(self.reaction, 0.0),
        )
    }
}

/// `u_t + u u_x + delta^2 u_xxx = 0` on `[0, 2]`, `u(x, 0) = -a cos(pi x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Kdv {
    pub delta2: f64,
    pub amplitude: f64,
}

impl Default for Kdv {
    fn default() -> Self {
        Self {
            delta2: 0.0025,
            amplitude: 1.0,
        }
    }
}

impl ScalarPde for Kdv {
    fn bounds(&self) -> (f64, f64) {
        (0.0, 2.0)
    }

    fn spatial_order(&self) -> usize {
        3
    }

    fn initial(&self, x: f64) -> f64 {
        -self.amplitude * (PI * x).cos()
    }

    fn residual(&self, tape: &mut Tape, d: &Derivs) -> Result<Var> {
        let (u, ut, ux, uxxx) = (d.get(0, &[])?, d.get(0, &[T])?, d.get(0, &[X])?, d.get(0, &[X, X, X])?);
        let adv = tape.mul(u, ux)?;
        let disp = tape.scale(uxxx, self.delta2);
        let r = tape.add(ut, adv)?;
        tape.add(r, disp)
    }

    fn nonlinear_needs_ux(&self) -> bool {
        true
    }

    fn nonlinear_field(&self, tape: &mut Tape, u: Var, ux: Option<Var>) -> Result<Var> {
        let ux = ux.ok_or_else(|| crate::Error::InvalidArgument("KdV nonlinear term needs u_x".into()))?;
        tape.mul(u, ux)
    }

    fn nonlinear_values(&self, u: &[f64], ux: &[f64]) -> Vec<f64> {
        u.iter().zip(ux).map(|(a, b)| a * b).collect()
    }

    fn multipliers(&self, xi: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(0.0, -8.0 * PI.powi(3) * self.delta2 * xi.powi(3)),
            Complex64::new(1.0, 0.0),
        )
    }
}
