use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Classical RK4 on `v = e^{L t} u^` (Lawson), the linear part exact.
    #[default]
    IfRk4,
    /// Classical RK4 on the full right-hand side.
    Rk4,
}

/// Time stepper for `u^_t = -L u^ - N(u^)` with diagonal `L`.
pub(crate) struct Stepper {
    lin: Vec<Complex64>,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    dt: f64,
    integrator: Integrator,
}

fn axpy(a: &[Complex64], s: f64, b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

fn hadamard(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

impl Stepper {
    pub fn new(lin: Vec<Complex64>, dt: f64, integrator: Integrator) -> Self {
        let e = lin.iter().map(|l| (-l * dt).exp()).collect();
        let e2 = lin.iter().map(|l| (-l * dt * 0.5).exp()).collect();
        Self {
            lin,
            e,
            e2,
            dt,
            integrator,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step; `nl` returns `N(u^)`.
    pub fn step(&self, u: &mut Vec<Complex64>, nl: &mut dyn FnMut(&[Complex64]) -> Vec<Complex64>) {
        let h = self.dt;
        let neg = |v: Vec<Complex64>| -> Vec<Complex64> { v.into_iter().map(|z| -z).collect() };
        match self.integrator {
            Integrator::IfRk4 => {
                let k1 = neg(nl(u));
                let a = hadamard(&self.e2, &axpy(u, 0.5 * h, &k1));
                let k2 = neg(nl(&a));
                let e2u = hadamard(&self.e2, u);
                let b = axpy(&e2u, 0.5 * h, &k2);
                let k3 = neg(nl(&b));
                let eu = hadamard(&self.e, u);
                let c = axpy(&eu, h, &hadamard(&self.e2, &k3));
                let k4 = neg(nl(&c));
                for i in 0..u.len() {
                    u[i] = eu[i] + h / 6.0 * (self.e[i] * k1[i] + 2.0 * self.e2[i] * (k2[i] + k3[i]) + k4[i]);
                }
            }
            Integrator::Rk4 => {
                let mut rhs = |v: &[Complex64]| -> Vec<Complex64> {
                    let n = nl(v);
                    v.iter().zip(&self.lin).zip(n).map(|((x, l), y)| -l * x - y).collect()
                };
                let k1 = rhs(u);
                let k2 = rhs(&axpy(u, 0.5 * h, &k1));
                let k3 = rhs(&axpy(u, 0.5 * h, &k2));
                let k4 = rhs(&axpy(u, h, &k3));
                for i in 0..u.len() {
                    u[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }
    }
}

/// Whole steps of size `dt` covering `interval`, which must be a multiple.
pub(crate) fn steps_for(interval: f64, dt: f64) -> Result<usize> {
    let s = (interval / dt).round();
    if interval < 0.0 || (s * dt - interval).abs() > 1e-9 * interval.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} does not divide the sampling interval {interval}"
        )));
    }
    Ok(s as usize)
}
