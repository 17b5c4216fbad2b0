use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::autodiff::Tape;
use crate::jetnet::Network;
use crate::losses::{fourier_residual_mc, McSamples};
use crate::pdezoo::PdeProblem;
use crate::spectral::SpectralWeight;
use crate::{Error, Result};

/// Largest parameter count for explicit Jacobian assembly.
pub const NTK_PARAM_LIMIT: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct NtkProbeResult {
    pub modes: Vec<Vec<f64>>,
    /// Row-major `K x K` Hermitian kernel.
    pub kernel: Vec<Complex64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub weight: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NtkProbe {
    pub unweighted: NtkProbeResult,
    pub weighted: NtkProbeResult,
}

/// Values `W R^(xi_k)` and their parameter gradients
/// `d Re / d theta + i d Im / d theta`, one row per mode.
///
/// `samples` must hold a single time slice.
pub fn residual_jacobian(
    net: &Network,
    problem: &PdeProblem,
    samples: &McSamples,
    weight: &SpectralWeight,
) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    if samples.times.len() != 1 {
        return Err(Error::InvalidArgument("the kernel probe takes one time slice".into()));
    }
    let mut tape = Tape::new();
    let vars = net.bind(&mut tape);
    let r = fourier_residual_mc(&mut tape, problem, net, &vars, samples, weight)?
        .ok_or_else(|| Error::InvalidArgument("kernel probe needs at least one retained mode".into()))?;
    let k = tape.value(r.re).len();
    let mut values = Vec::with_capacity(k);
    let mut rows = Vec::with_capacity(k);
    for m in 0..k {
        let re = tape.index(r.re, m)?;
        let im = tape.index(r.im, m)?;
        values.push(Complex64::new(tape.scalar(re), tape.scalar(im)));
        let gr = tape.backward(re)?;
        let gi = tape.backward(im)?;
        let mut row = Vec::with_capacity(net.param_count());
        for (&v, p) in vars.iter().zip(net.params()) {
            let a = gr.get(v).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; p.len()]);
            let b = gi.get(v).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; p.len()]);
            row.extend(a.iter().zip(&b).map(|(x, y)| Complex64::new(*x, *y)));
        }
        rows.push(row);
    }
    Ok((values, rows))
}

/// `K(i, j) = <J_i, J_j>` with the Hermitian inner product.
fn gram(jac: &[Vec<Complex64>]) -> Vec<Complex64> {
    let k = jac.len();
    let mut out = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in i..k {
            let s: Complex64 = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b.conj()).sum();
            out[i * k + j] = s;
            out[j * k + i] = s.conj();
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix via its real symmetric embedding
/// `[[A, -B], [B, A]]`, whose spectrum repeats each eigenvalue twice.
fn hermitian_eigenvalues(kernel: &[Complex64], k: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        let z = kernel[(r % k) * k + (c % k)];
        match (r < k, c < k) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.into_iter().step_by(2).collect()
}

fn probe_one(net: &Network, problem: &PdeProblem, samples: &McSamples, modes: &[Vec<f64>], w: &[Complex64]) -> Result<NtkProbeResult> {
    let weight = SpectralWeight::from_values(modes.to_vec(), w.to_vec())?;
    let (_, jac) = residual_jacobian(net, problem, samples, &weight)?;
    let kernel = gram(&jac);
    let eigenvalues = hermitian_eigenvalues(&kernel, modes.len());
    Ok(NtkProbeResult {
        modes: modes.to_vec(),
        kernel,
        eigenvalues,
        weight: w.to_vec(),
    })
}

/// Fourier-residual tangent kernels `K` (unit weight) and `K_w` (residual
/// multiplied by `omega`), each assembled from its own Jacobian.
pub fn ntk_probe(net: &Network, problem: &PdeProblem, samples: &McSamples, modes: &[Vec<f64>], omega: &[Complex64]) -> Result<NtkProbe> {
    if net.param_count() > NTK_PARAM_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "kernel probe limited to {NTK_PARAM_LIMIT} parameters, network has {}",
            net.param_count()
        )));
    }
    if modes.len() != omega.len() || modes.is_empty() {
        return Err(Error::Shape("one weight value per mode is required".into()));
    }
    let ones = vec![Complex64::new(1.0, 0.0); modes.len()];
    Ok(NtkProbe {
        unweighted: probe_one(net, problem, samples, modes, &ones)?,
        weighted: probe_one(net, problem, samples, modes, omega)?,
    })
}
