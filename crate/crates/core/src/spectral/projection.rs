use std::f64::consts::PI;
use std::sync::Arc;

use super::fft::{Fft2Plan, FftPlan};
use super::grid::fftfreq;
use crate::autodiff::{gemm, gemm_bt, LinearOperator};
use crate::{Error, Result};

/// Row-wise 1-D DFT, scaled, optionally restricted to a subset of bins.
///
/// Forward: `out_k = scale * sum_j x_j e^{-2 pi i jk/n}` for `k` in `bins`.
#[derive(Debug, Clone)]
pub struct DftOperator {
    plan: FftPlan,
    scale: f64,
    bins: Vec<usize>,
}

impl DftOperator {
    pub fn new(n: usize, scale: f64, bins: Vec<usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("transform length {n} < 2")));
        }
        if bins.iter().any(|&b| b >= n) {
            return Err(Error::InvalidArgument("bin index out of range".into()));
        }
        Ok(Self {
            plan: FftPlan::new(n),
            scale,
            bins,
        })
    }

    /// All `n` bins, unscaled.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, 1.0, (0..n).collect())
    }

    /// Bins whose wavenumber `k/length` has magnitude at most `cutoff`.
    pub fn bins_within(n: usize, length: f64, cutoff: Option<f64>) -> Vec<usize> {
        fftfreq(n, length)
            .iter()
            .enumerate()
            .filter(|(_, xi)| cutoff.is_none_or(|c| xi.abs() <= c * (1.0 + 1e-12)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }
}

impl LinearOperator for DftOperator {
    fn in_len(&self) -> usize {
        self.plan.len()
    }

    fn out_len(&self) -> usize {
        self.bins.len()
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        let (n, m) = (self.plan.len(), self.bins.len());
        let mut br = vec![0.0; n];
        let mut bi = vec![0.0; n];
        for r in 0..rows {
            br.copy_from_slice(&re[r * n..(r + 1) * n]);
            match im {
                Some(im) => bi.copy_from_slice(&im[r * n..(r + 1) * n]),
                None => bi.fill(0.0),
            }
            self.plan.forward(&mut br, &mut bi);
            for (o, &b) in self.bins.iter().enumerate() {
                out_re[r * m + o] = self.scale * br[b];
                out_im[r * m + o] = self.scale * bi[b];
            }
        }
    }

    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        let (n, m) = (self.plan.len(), self.bins.len());
        let mut br = vec![0.0; n];
        let mut bi = vec![0.0; n];
        for r in 0..rows {
            br.fill(0.0);
            bi.fill(0.0);
            for (o, &b) in self.bins.iter().enumerate() {
                br[b] += re[r * m + o];
                bi[b] += im[r * m + o];
            }
            self.plan.backward(&mut br, &mut bi);
            for j in 0..n {
                out_re[r * n + j] = self.scale * br[j];
                out_im[r * n + j] = self.scale * bi[j];
            }
        }
    }
}

/// Row-wise unnormalized 2-D DFT of flattened `[ny][nx]` fields.
#[derive(Debug, Clone)]
pub struct Dft2Operator {
    plan: Fft2Plan,
}

impl Dft2Operator {
    pub fn new(ny: usize, nx: usize) -> Result<Self> {
        if ny < 2 || nx < 2 {
            return Err(Error::InvalidArgument("2-D transform needs at least 2x2".into()));
        }
        Ok(Self {
            plan: Fft2Plan::new(ny, nx),
        })
    }
}

impl LinearOperator for Dft2Operator {
    fn in_len(&self) -> usize {
        let (a, b) = self.plan.shape();
        a * b
    }

    fn out_len(&self) -> usize {
        self.in_len()
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        let n = self.in_len();
        out_re[..rows * n].copy_from_slice(&re[..rows * n]);
        match im {
            Some(im) => out_im[..rows * n].copy_from_slice(&im[..rows * n]),
            None => out_im.fill(0.0),
        }
        for r in 0..rows {
            self.plan
                .forward(&mut out_re[r * n..(r + 1) * n], &mut out_im[r * n..(r + 1) * n]);
        }
    }

    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        let n = self.in_len();
        out_re[..rows * n].copy_from_slice(&re[..rows * n]);
        out_im[..rows * n].copy_from_slice(&im[..rows * n]);
        for r in 0..rows {
            self.plan
                .backward(&mut out_re[r * n..(r + 1) * n], &mut out_im[r * n..(r + 1) * n]);
        }
    }
}

#[derive(Debug)]
struct PhiBlock {
    cos: Vec<f64>,
    sin: Vec<f64>,
    volume: f64,
}

#[derive(Debug)]
struct PhiData {
    modes: Vec<Vec<f64>>,
    n: usize,
    blocks: Vec<PhiBlock>,
    shared: bool,
}

/// Monte-Carlo Fourier projection `(|Omega|/N) Phi f`, with
/// `Phi_kj = exp(-2 pi i <xi_k, x_j>)`, or its synthesis counterpart
/// `Re`-ready `(1/|Omega|) Phi^H z`.
///
/// Samples are either shared by every input row or given per row (each row
/// then has its own domain volume).
#[derive(Debug, Clone)]
pub struct McProjection {
    data: Arc<PhiData>,
    synthesis: bool,
}

fn build_block(modes: &[Vec<f64>], samples: &[Vec<f64>], volume: f64) -> Result<PhiBlock> {
    let (k, n) = (modes.len(), samples.len());
    let mut cos = vec![0.0; k * n];
    let mut sin = vec![0.0; k * n];
    for (i, xi) in modes.iter().enumerate() {
        for (j, x) in samples.iter().enumerate() {
            if x.len() != xi.len() {
                return Err(Error::Shape(format!(
                    "sample dimension {} vs mode dimension {}",
                    x.len(),
                    xi.len()
                )));
            }
            let dot: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
            let th = 2.0 * PI * dot;
            cos[i * n + j] = th.cos();
            sin[i * n + j] = th.sin();
        }
    }
    Ok(PhiBlock { cos, sin, volume })
}

impl McProjection {
    pub fn shared(modes: Vec<Vec<f64>>, samples: &[Vec<f64>], volume: f64) -> Result<Self> {
        if modes.is_empty() || samples.is_empty() {
            return Err(Error::InvalidArgument("projection needs modes and samples".into()));
        }
        let block = build_block(&modes, samples, volume)?;
        Ok(Self {
            data: Arc::new(PhiData {
                n: samples.len(),
                modes,
                blocks: vec![block],
                shared: true,
            }),
            synthesis: false,
        })
    }

    pub fn per_row(modes: Vec<Vec<f64>>, rows: &[Vec<Vec<f64>>], volumes: &[f64]) -> Result<Self> {
        if modes.is_empty() || rows.is_empty() || rows.len() != volumes.len() {
            return Err(Error::InvalidArgument("per-row projection needs modes, rows and volumes".into()));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("every row needs the same nonzero sample count".into()));
        }
        let blocks = rows
            .iter()
            .zip(volumes)
            .map(|(s, &v)| build_block(&modes, s, v))
            .collect::<Result<_>>()?;
        Ok(Self {
            data: Arc::new(PhiData {
                n,
                modes,
                blocks,
                shared: false,
            }),
            synthesis: false,
        })
    }

    /// `(1/|Omega|) Phi^H`, mapping mode coefficients back to the samples.
    pub fn synthesis(&self) -> Self {
        Self {
            data: self.data.clone(),
            synthesis: true,
        }
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.data.modes
    }

    pub fn samples(&self) -> usize {
        self.data.n
    }

    fn block_for(&self, row: usize) -> &PhiBlock {
        if self.data.shared {
            &self.data.blocks[0]
        } else {
            &self.data.blocks[row]
        }
    }

    fn chunks(&self, rows: usize) -> Vec<(usize, usize)> {
        if self.data.shared {
            vec![(0, rows)]
        } else {
            (0..rows).map(|r| (r, r + 1)).collect()
        }
    }

    /// `scale * Phi` on rows `[r0, r1)`.
    fn phi(&self, r0: usize, r1: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64], scale: f64) {
        let (k, n) = (self.data.modes.len(), self.data.n);
        let b = self.block_for(r0);
        let rows = r1 - r0;
        let a = &re[r0 * n..r1 * n];
        let (o_re, o_im) = (&mut out_re[r0 * k..r1 * k], &mut out_im[r0 * k..r1 * k]);
        // re: a C^T + b S^T ; im: b C^T - a S^T
        gemm_bt(rows, n, k, a, &b.cos, o_re, false);
        let mut tmp = vec![0.0; rows * k];
        gemm_bt(rows, n, k, a, &b.sin, &mut tmp, false);
        for (o, t) in o_im.iter_mut().zip(&tmp) {
            *o = -t;
        }
        if let Some(im) = im {
            let bi = &im[r0 * n..r1 * n];
            gemm_bt(rows, n, k, bi, &b.sin, o_re, true);
            gemm_bt(rows, n, k, bi, &b.cos, o_im, true);
        }
        o_re.iter_mut().chain(o_im.iter_mut()).for_each(|v| *v *= scale);
    }

    /// `scale * Phi^H` on rows `[r0, r1)`.
    fn phi_h(&self, r0: usize, r1: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64], scale: f64) {
        let (k, n) = (self.data.modes.len(), self.data.n);
        let b = self.block_for(r0);
        let rows = r1 - r0;
        let (c, d) = (&re[r0 * k..r1 * k], &im[r0 * k..r1 * k]);
        let (o_re, o_im) = (&mut out_re[r0 * n..r1 * n], &mut out_im[r0 * n..r1 * n]);
        // re: c C - d S ; im: d C + c S
        gemm(rows, k, n, c, &b.cos, o_re, false);
        let mut tmp = vec![0.0; rows * n];
        gemm(rows, k, n, d, &b.sin, &mut tmp, false);
        for (o, t) in o_re.iter_mut().zip(&tmp) {
            *o -= t;
        }
        gemm(rows, k, n, d, &b.cos, o_im, false);
        gemm(rows, k, n, c, &b.sin, o_im, true);
        o_re.iter_mut().chain(o_im.iter_mut()).for_each(|v| *v *= scale);
    }

    fn projection_scale(&self, row: usize) -> f64 {
        self.block_for(row).volume / self.data.n as f64
    }

    fn synthesis_scale(&self, row: usize) -> f64 {
        1.0 / self.block_for(row).volume
    }
}

impl LinearOperator for McProjection {
    fn in_len(&self) -> usize {
        if self.synthesis {
            self.data.modes.len()
        } else {
            self.data.n
        }
    }

    fn out_len(&self) -> usize {
        if self.synthesis {
            self.data.n
        } else {
            self.data.modes.len()
        }
    }

    fn fixed_rows(&self) -> Option<usize> {
        (!self.data.shared).then_some(self.data.blocks.len())
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        for (r0, r1) in self.chunks(rows) {
            if self.synthesis {
                let s = self.synthesis_scale(r0);
                let zeros;
                let im = match im {
                    Some(im) => im,
                    None => {
                        zeros = vec![0.0; re.len()];
                        &zeros
                    }
                };
                self.phi_h(r0, r1, re, im, out_re, out_im, s);
            } else {
                let s = self.projection_scale(r0);
                self.phi(r0, r1, re, im, out_re, out_im, s);
            }
        }
    }

    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        for (r0, r1) in self.chunks(rows) {
            if self.synthesis {
                let s = self.synthesis_scale(r0);
                self.phi(r0, r1, re, Some(im), out_re, out_im, s);
            } else {
                let s = self.projection_scale(r0);
                self.phi_h(r0, r1, re, im, out_re, out_im, s);
            }
        }
    }
}

/// `xi = k / length` for `k = 1..=kmax`, as 1-D mode vectors.
pub fn positive_modes(kmax: usize, length: f64) -> Vec<Vec<f64>> {
    (1..=kmax as i64).map(|k| vec![k as f64 / length]).collect()
}

/// All integer mode vectors with `|k_i| <= kmax` (including zero), scaled by
/// the per-dimension period lengths.
pub fn mode_box(kmax: usize, lengths: &[f64]) -> Vec<Vec<f64>> {
    let k = kmax as i64;
    let mut out = vec![Vec::new()];
    for &l in lengths {
        let mut next = Vec::new();
        for prefix in &out {
            for ki in -k..=k {
                let mut v: Vec<f64> = prefix.clone();
                v.push(ki as f64 / l);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
