use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Derivs;
use crate::autodiff::{ComplexPair, Tape, Tensor, Var};
use crate::spectral::{fftfreq, Fft2Plan, McProjection};
use crate::{Error, Result};

const X: usize = 0;
const Y: usize = 1;
const T: usize = 2;
const PSI: usize = 0;
const OMEGA: usize = 1;

/// Vorticity-stream Navier-Stokes on `[-2 pi, 2 pi]^2`:
/// `omega_t + psi_y omega_x - psi_x omega_y - nu lap omega = 0`,
/// `omega = -lap psi`. The network outputs `(psi, omega)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavierStokes {
    pub nu: f64,
    pub t0: f64,
    pub t1: f64,
    /// Seed of the random initial vorticity (independent of training seeds).
    pub ic_seed: u64,
    /// Angular wavenumber cutoff of the initial spectrum.
    pub ic_cutoff: f64,
    /// RMS of the initial vorticity.
    pub ic_rms: f64,
}

impl Default for NavierStokes {
    fn default() -> Self {
        Self {
            nu: 0.01,
            t0: 0.5,
            t1: 1.5,
            ic_seed: 0,
            ic_cutoff: 4.0,
            ic_rms: 1.0,
        }
    }
}

impl NavierStokes {
    pub fn bounds(&self) -> (f64, f64) {
        (-2.0 * PI, 2.0 * PI)
    }

    pub fn length(&self) -> f64 {
        4.0 * PI
    }

    pub fn residuals(&self, tape: &mut Tape, d: &Derivs) -> Result<Vec<Var>> {
        let w = d.get(OMEGA, &[])?;
        let wt = d.get(OMEGA, &[T])?;
        let (wx, wy) = (d.get(OMEGA, &[X])?, d.get(OMEGA, &[Y])?);
        let (wxx, wyy) = (d.get(OMEGA, &[X, X])?, d.get(OMEGA, &[Y, Y])?);
        let (px, py) = (d.get(PSI, &[X])?, d.get(PSI, &[Y])?);
        let (pxx, pyy) = (d.get(PSI, &[X, X])?, d.get(PSI, &[Y, Y])?);

        let a = tape.mul(py, wx)?;
        let b = tape.mul(px, wy)?;
        let adv = tape.sub(a, b)?;
        let lap_w = tape.add(wxx, wyy)?;
        let visc = tape.scale(lap_w, -self.nu);
        let r = tape.add(wt, adv)?;
        let r = tape.add(r, visc)?;

        let lap_p = tape.add(pxx, pyy)?;
        let compat = tape.add(w, lap_p)?;
        Ok(vec![r, compat])
    }
}

/// Cycle wavenumbers `k / L` of an `n`-point axis of the periodic box.
pub fn ns_wavenumbers(n: usize) -> Vec<f64> {
    fftfreq(n, 4.0 * PI)
}

fn filter(kappa: f64, cutoff: f64) -> f64 {
    if kappa > cutoff {
        0.0
    } else {
        kappa / (1.0 + (kappa / 4.0).powi(4))
    }
}

/// Hermitian spectrum `[ky][kx]` of a random initial vorticity: complex white
/// noise shaped by `S(k) = k / (1 + (k/4)^4)` and cut at `|k| <= cutoff`,
/// with `k` the angular wavenumber.
pub fn ns_initial_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, cutoff: f64) -> Vec<Complex64> {
    let xi = ns_wavenumbers(n);
    let mut raw = vec![Complex64::new(0.0, 0.0); n * n];
    for iy in 0..n {
        for ix in 0..n {
            let kappa = 2.0 * PI * xi[ix].hypot(xi[iy]);
            let zr: f64 = rng.sample(StandardNormal);
            let zi: f64 = rng.sample(StandardNormal);
            raw[iy * n + ix] = Complex64::new(zr, zi) * filter(kappa, cutoff);
        }
    }
    let mut out = raw.clone();
    for iy in 0..n {
        for ix in 0..n {
            let mirror = raw[((n - iy) % n) * n + (n - ix) % n];
            out[iy * n + ix] = 0.5 * (raw[iy * n + ix] + mirror.conj());
        }
    }
    out
}

/// Real initial vorticity on the `n x n` mesh (row-major `[y][x]`), rescaled
/// to the requested RMS.
pub fn ns_initial_condition<R: Rng + ?Sized>(rng: &mut R, n: usize, cutoff: f64, rms: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("initial-condition mesh {n} < 2")));
    }
    let spec = ns_initial_spectrum(rng, n, cutoff);
    let mut field: Vec<f64> = spec.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = spec.iter().map(|z| z.im).collect();
    Fft2Plan::new(n, n).backward(&mut field, &mut im);
    let cur = (field.iter().map(|v| v * v).sum::<f64>() / field.len() as f64).sqrt();
    if cur == 0.0 {
        return Err(Error::InvalidArgument("initial spectrum is empty below the cutoff".into()));
    }
    Ok(field.iter().map(|v| v * rms / cur).collect())
}

fn row(vals: impl Iterator<Item = f64>) -> Arc<Tensor> {
    Arc::new(Tensor::vector(vals.collect()))
}

/// Fourier-space vorticity residual from stream-function samples.
///
/// `psi` and `psi_t` are `[rows, N]` samples matching `proj`. Velocities and
/// vorticity gradients are rebuilt at the samples from the projected
/// coefficients, the advection is formed pointwise and projected again.
pub fn ns_mc_residual(tape: &mut Tape, psi: Var, psi_t: Var, proj: &McProjection, nu: f64) -> Result<ComplexPair> {
    let modes = proj.modes();
    if modes.iter().any(|m| m.len() != 2) {
        return Err(Error::Shape("Navier-Stokes residual needs 2-D modes".into()));
    }
    let k2 = row(modes.iter().map(|m| 4.0 * PI * PI * (m[0] * m[0] + m[1] * m[1])));
    let zero = row(modes.iter().map(|_| 0.0));
    let ikx = row(modes.iter().map(|m| 2.0 * PI * m[0]));
    let iky = row(modes.iter().map(|m| 2.0 * PI * m[1]));
    let neg_ikx = row(modes.iter().map(|m| -2.0 * PI * m[0]));

    let op: Arc<dyn crate::autodiff::LinearOperator> = Arc::new(proj.clone());
    let synth: Arc<dyn crate::autodiff::LinearOperator> = Arc::new(proj.synthesis());

    let psi_hat = tape.linear(op.clone(), psi)?;
    let omega_hat = tape.complex_mul_const(psi_hat, &k2, &zero)?;
    let u_hat = tape.complex_mul_const(psi_hat, &zero, &iky)?;
    let v_hat = tape.complex_mul_const(psi_hat, &zero, &neg_ikx)?;
    let wx_hat = tape.complex_mul_const(omega_hat, &zero, &ikx)?;
    let wy_hat = tape.complex_mul_const(omega_hat, &zero, &iky)?;

    let u = tape.linear_complex(synth.clone(), u_hat)?.re;
    let v = tape.linear_complex(synth.clone(), v_hat)?.re;
    let wx = tape.linear_complex(synth.clone(), wx_hat)?.re;
    let wy = tape.linear_complex(synth, wy_hat)?.re;
    let a = tape.mul(u, wx)?;
    let b = tape.mul(v, wy)?;
    let adv = tape.add(a, b)?;
    let adv_hat = tape.linear(op.clone(), adv)?;

    let pt_hat = tape.linear(op, psi_t)?;
    let wt_hat = tape.complex_mul_const(pt_hat, &k2, &zero)?;
    let nu_k2 = row(k2.data().iter().map(|k| nu * k));
    let visc = tape.complex_mul_const(omega_hat, &nu_k2, &zero)?;
    let r = tape.complex_add(wt_hat, adv_hat)?;
    tape.complex_add(r, visc)
}
