//! Training objective: physics, initial and boundary terms plus the
//! Fourier-space enhanced term on a grid or from Monte-Carlo samples.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ComplexPair, LinearOperator, Tape, Tensor, Var};
use crate::jetnet::{JetPlan, Network};
use crate::pdezoo::{ns_mc_residual, Derivs, PdeProblem};
use crate::spectral::{fftfreq, DftOperator, McProjection, SpectralWeight};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Fixed,
    /// Rebalance by parameter-gradient norms every `every` steps with an
    /// exponential moving average of rate `alpha`. The tuned factors multiply
    /// the configured weights.
    GradNorm { alpha: f64, every: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub physics: f64,
    pub boundary: f64,
    pub fourier: f64,
    pub mode: WeightMode,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            physics: 1.0,
            boundary: 10.0,
            fourier: 0.05,
            mode: WeightMode::Fixed,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.physics, self.boundary, self.fourier];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("loss weights must be finite and nonnegative".into()));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::Config("at least one loss weight must be positive".into()));
        }
        if let WeightMode::GradNorm { alpha, every } = self.mode {
            if !(0.0..=1.0).contains(&alpha) || every == 0 {
                return Err(Error::Config("grad-norm tuning needs alpha in [0, 1] and every >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantileSpec {
    pub enabled: bool,
    pub tau: f64,
}

impl Default for QuantileSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            tau: 0.925,
        }
    }
}

impl QuantileSpec {
    pub fn off() -> Self {
        Self {
            enabled: false,
            tau: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("quantile tau {} outside (0, 1]", self.tau)));
        }
        Ok(())
    }

    /// Warning text when tau sits below the range that keeps the worst modes
    /// in play.
    pub fn advisory(&self) -> Option<String> {
        (self.enabled && !(0.9..=0.99).contains(&self.tau))
            .then(|| format!("quantile tau {} is outside the usual [0.9, 0.99]", self.tau))
    }
}

/// Scalar values of every term for one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub physics: f64,
    pub compatibility: f64,
    pub initial: f64,
    pub boundary: f64,
    pub fourier: f64,
    pub total: f64,
    /// Parameter-gradient norms of (physics, boundary, fourier) when tuned.
    pub grad_norms: Option<[f64; 3]>,
}

/// Tape nodes of the individual terms.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub physics: Var,
    pub compatibility: Option<Var>,
    pub initial: Var,
    pub boundary: Option<Var>,
    pub fourier: Option<Var>,
}

impl LossTerms {
    /// `physics + compatibility`, the term scaled by the physics weight.
    pub fn physics_group(&self, tape: &mut Tape) -> Result<Var> {
        match self.compatibility {
            Some(c) => tape.add(self.physics, c),
            None => Ok(self.physics),
        }
    }

    /// `initial + boundary`, the term scaled by the boundary weight.
    pub fn boundary_group(&self, tape: &mut Tape) -> Result<Var> {
        match self.boundary {
            Some(b) => tape.add(self.initial, b),
            None => Ok(self.initial),
        }
    }

    /// `l_p (physics + compat) + l_b (initial + boundary) + l_f fourier`.
    ///
    /// Terms with a zero weight are left off the tape entirely.
    pub fn total(&self, tape: &mut Tape, lambda: [f64; 3]) -> Result<(Var, LossReport)> {
        let groups = [
            Some(self.physics_group(tape)?),
            Some(self.boundary_group(tape)?),
            self.fourier,
        ];
        let mut total: Option<Var> = None;
        for (g, &l) in groups.iter().zip(&lambda) {
            if let (Some(g), true) = (g, l != 0.0) {
                let s = tape.scale(*g, l);
                total = Some(match total {
                    Some(t) => tape.add(t, s)?,
                    None => s,
                });
            }
        }
        let total = match total {
            Some(t) => t,
            None => tape.constant(Tensor::scalar(0.0)),
        };
        let val = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v));
        let report = LossReport {
            physics: tape.scalar(self.physics),
            compatibility: val(self.compatibility),
            initial: tape.scalar(self.initial),
            boundary: val(self.boundary),
            fourier: val(self.fourier),
            total: tape.scalar(total),
            grad_norms: None,
        };
        Ok((total, report))
    }
}

fn mse(tape: &mut Tape, r: Var) -> Result<Var> {
    let sq = tape.square(r);
    tape.mean(sq)
}

/// Index of the lower empirical `tau`-quantile among `n` sorted values.
pub fn quantile_index(n: usize, tau: f64) -> usize {
    ((tau * n as f64).ceil() as usize).clamp(1, n) - 1
}

/// Empirical `tau`-quantile of all entries of `values`; the gradient flows to
/// the single selected element.
pub fn quantile_reduce(tape: &mut Tape, values: Var, tau: f64) -> Result<Var> {
    let v = tape.value(values);
    if v.is_empty() {
        return Err(Error::Shape("quantile of an empty batch".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantile tau {tau} outside (0, 1]")));
    }
    let data = v.data();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].total_cmp(&data[b]).then(a.cmp(&b)));
    let pick = order[quantile_index(data.len(), tau)];
    tape.index(values, pick)
}

/// Mean squared PDE residual, plus the mean squared compatibility residual
/// for two-output problems.
pub fn physics_loss(tape: &mut Tape, problem: &PdeProblem, d: &Derivs) -> Result<(Var, Option<Var>)> {
    let rs = problem.physical_residuals(tape, d)?;
    let phys = mse(tape, rs[0])?;
    let compat = match rs.get(1) {
        Some(&c) => Some(mse(tape, c)?),
        None => None,
    };
    Ok((phys, compat))
}

/// Initial-condition targets: points `[B, input_dim]` at the initial time and
/// values `[B, outputs]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialBatch {
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryBatch {
    None,
    /// Point pairs on opposite faces of the periodic box.
    Periodic { left: Vec<f64>, right: Vec<f64> },
    /// Prescribed values `[B, outputs]` at `points`.
    Dirichlet { points: Vec<f64>, targets: Vec<f64> },
}

fn values_on_tape(tape: &mut Tape, net: &Network, vars: &[Var], points: &[f64]) -> Result<Var> {
    let plan = Arc::new(JetPlan::new(net.config().input_dim, &[])?);
    Ok(net.forward_jet(tape, vars, points, &plan)?.stacked)
}

/// MSE of `u(x, t0) - u0(x)` and of the boundary mismatch (periodic or
/// Dirichlet); the boundary node is absent for [`BoundaryBatch::None`].
pub fn boundary_initial_loss(
    tape: &mut Tape,
    net: &Network,
    vars: &[Var],
    initial: &InitialBatch,
    boundary: &BoundaryBatch,
) -> Result<(Var, Option<Var>)> {
    let outs = net.config().output_dim;
    let u0 = values_on_tape(tape, net, vars, &initial.points)?;
    let rows = tape.value(u0).rows();
    if initial.targets.len() != rows * outs {
        return Err(Error::Shape("initial targets do not match the initial points".into()));
    }
    let target = Tensor::matrix(rows, outs, initial.targets.iter().map(|v| -v).collect());
    let diff = tape.add_const(u0, &target)?;
    let init = mse(tape, diff)?;
    let bnd = match boundary {
        BoundaryBatch::None => None,
        BoundaryBatch::Periodic { left, right } => {
            if left.len() != right.len() {
                return Err(Error::Shape("periodic boundary pairs differ in length".into()));
            }
            let both: Vec<f64> = left.iter().chain(right).copied().collect();
            let v = values_on_tape(tape, net, vars, &both)?;
            let n = tape.value(v).rows() / 2;
            let a = tape.slice_rows(v, 0, n)?;
            let b = tape.slice_rows(v, n, 2 * n)?;
            let d = tape.sub(a, b)?;
            Some(mse(tape, d)?)
        }
        BoundaryBatch::Dirichlet { points, targets } => {
            let v = values_on_tape(tape, net, vars, points)?;
            let rows = tape.value(v).rows();
            if targets.len() != rows * outs {
                return Err(Error::Shape("boundary targets do not match the boundary points".into()));
            }
            let t = Tensor::matrix(rows, outs, targets.iter().map(|v| -v).collect());
            let d = tape.add_const(v, &t)?;
            Some(mse(tape, d)?)
        }
    };
    Ok((init, bnd))
}

/// Space-time mesh for the grid path: `space[d]` points per periodic
/// dimension and the time slices.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub space: Vec<usize>,
    pub times: Vec<f64>,
}

impl GridSpec {
    /// `n` equispaced slices including both ends of `[t0, t1]`.
    pub fn slices(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![t0];
        }
        (0..n).map(|j| t0 + (t1 - t0) * j as f64 / (n - 1) as f64).collect()
    }
}

/// Per-dimension mesh coordinates of the periodic box (right end excluded).
pub fn periodic_mesh(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| a + (b - a) * j as f64 / n as f64).collect()
}

/// Modes of the grid path in DFT bin order.
pub fn grid_modes(problem: &PdeProblem, space: &[usize]) -> Result<Vec<Vec<f64>>> {
    match problem {
        PdeProblem::NavierStokes(_) => Err(Error::Unsupported(
            "the Navier-Stokes grid path uses the sampled pipeline on mesh points".into(),
        )),
        _ => {
            let n = *space.first().ok_or_else(|| Error::Shape("grid needs one spatial size".into()))?;
            Ok(fftfreq(n, problem.lengths()[0]).into_iter().map(|x| vec![x]).collect())
        }
    }
}

/// Monte-Carlo samples: spatial points per time slice, either one set shared
/// by every slice or one set per slice, with the slice volumes.
#[derive(Clone, Debug, PartialEq)]
pub struct McSamples {
    pub times: Vec<f64>,
    pub space: Vec<Vec<Vec<f64>>>,
    pub volumes: Vec<f64>,
}

impl McSamples {
    fn shared(&self) -> bool {
        self.space.len() == 1
    }

    fn validate(&self) -> Result<()> {
        let rows = self.times.len();
        if rows == 0 || self.space.is_empty() || self.space[0].is_empty() {
            return Err(Error::Shape("Monte-Carlo samples need times and points".into()));
        }
        if !(self.shared() || self.space.len() == rows) || self.volumes.len() != self.space.len() {
            return Err(Error::Shape("Monte-Carlo sample sets must be shared or one per time slice".into()));
        }
        let n = self.space[0].len();
        if self.space.iter().any(|s| s.len() != n) {
            return Err(Error::Shape("every time slice needs the same sample count".into()));
        }
        Ok(())
    }

    /// Space-time points `[rows * N, d + 1]` in slice-major order.
    fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (r, &t) in self.times.iter().enumerate() {
            let set = if self.shared() { &self.space[0] } else { &self.space[r] };
            for x in set {
                out.extend_from_slice(x);
                out.push(t);
            }
        }
        out
    }

    fn projection(&self, modes: Vec<Vec<f64>>) -> Result<McProjection> {
        if self.shared() {
            McProjection::shared(modes, &self.space[0], self.volumes[0])
        } else {
            McProjection::per_row(modes, &self.space, &self.volumes)
        }
    }
}

fn row_tensor(v: impl Iterator<Item = f64>) -> Arc<Tensor> {
    Arc::new(Tensor::vector(v.collect()))
}

fn complex_rows(vals: &[Complex64]) -> (Arc<Tensor>, Arc<Tensor>) {
    (row_tensor(vals.iter().map(|z| z.re)), row_tensor(vals.iter().map(|z| z.im)))
}

/// `W u_t^ + W m_lin u^ + W m_nl n^` for a scalar PDE, the transforms taken
/// by `op` on `[rows, N]` fields.
#[allow(clippy::too_many_arguments)]
fn scalar_weighted_residual(
    tape: &mut Tape,
    problem: &PdeProblem,
    net: &Network,
    vars: &[Var],
    points: &[f64],
    rows: usize,
    op: Arc<dyn LinearOperator>,
    modes: &[Vec<f64>],
    weight: &[Complex64],
) -> Result<ComplexPair> {
    let pde = problem.scalar().expect("scalar problem");
    let plan = Arc::new(problem.fourier_jet_spec().plan()?);
    let jet = net.forward_jet(tape, vars, points, &plan)?;
    let n = jet.batch / rows;
    let u = jet.output(tape, 0, &[])?;
    let ut = jet.output(tape, 0, &[1])?;
    let ux = if pde.nonlinear_needs_ux() {
        Some(jet.output(tape, 0, &[0])?)
    } else {
        None
    };
    let nl = pde.nonlinear_field(tape, u, ux)?;
    let mut parts = Vec::with_capacity(3);
    let mut w_lin = Vec::with_capacity(modes.len());
    let mut w_nl = Vec::with_capacity(modes.len());
    for (m, w) in modes.iter().zip(weight) {
        let (ml, mn) = pde.multipliers(m[0]);
        w_lin.push(w * ml);
        w_nl.push(w * mn);
    }
    for (field, mult) in [(ut, weight.to_vec()), (u, w_lin), (nl, w_nl)] {
        let f = tape.reshape(field, &[rows, n])?;
        let hat = tape.linear(op.clone(), f)?;
        let (re, im) = complex_rows(&mult);
        parts.push(tape.complex_mul_const(hat, &re, &im)?);
    }
    let r = tape.complex_add(parts[0], parts[1])?;
    tape.complex_add(r, parts[2])
}

fn ns_weighted_residual(
    tape: &mut Tape,
    problem: &PdeProblem,
    net: &Network,
    vars: &[Var],
    samples: &McSamples,
    proj: &McProjection,
    weight: &[Complex64],
) -> Result<ComplexPair> {
    let PdeProblem::NavierStokes(ns) = problem else {
        unreachable!("checked by caller")
    };
    let rows = samples.times.len();
    let plan = Arc::new(problem.fourier_jet_spec().plan()?);
    let jet = net.forward_jet(tape, vars, &samples.points(), &plan)?;
    let n = jet.batch / rows;
    let psi = jet.output(tape, 0, &[])?;
    let psi_t = jet.output(tape, 0, &[2])?;
    let psi = tape.reshape(psi, &[rows, n])?;
    let psi_t = tape.reshape(psi_t, &[rows, n])?;
    let r = ns_mc_residual(tape, psi, psi_t, proj, ns.nu)?;
    let (re, im) = complex_rows(weight);
    tape.complex_mul_const(r, &re, &im)
}

fn reduce(tape: &mut Tape, r: ComplexPair, quantile: &QuantileSpec) -> Result<Var> {
    let mag2 = tape.complex_abs2(r)?;
    if quantile.enabled {
        quantile_reduce(tape, mag2, quantile.tau)
    } else {
        tape.mean(mag2)
    }
}

fn retained(weight: &SpectralWeight) -> (Vec<usize>, Vec<Vec<f64>>, Vec<Complex64>) {
    let idx = weight.retained_indices();
    let modes = idx.iter().map(|&i| weight.modes()[i].clone()).collect();
    let vals = idx.iter().map(|&i| weight.values()[i]).collect();
    (idx, modes, vals)
}

/// Grid path: the network on the full space-time mesh, spatial transforms
/// per time slice, weighted spectral residual on the retained modes, reduced
/// by mean square or quantile of `|W R^|^2`.
///
/// The transform is the `(L/N)`-scaled DFT so grid and Monte-Carlo
/// coefficients approximate the same integral. Navier-Stokes runs the
/// sampled pipeline on the mesh nodes with `weight` over the mode box.
pub fn fourier_loss_grid(
    tape: &mut Tape,
    problem: &PdeProblem,
    net: &Network,
    vars: &[Var],
    grid: &GridSpec,
    weight: &SpectralWeight,
    quantile: &QuantileSpec,
) -> Result<Var> {
    if grid.times.is_empty() || grid.space.len() != problem.spatial_dims() {
        return Err(Error::Shape("grid needs time slices and one size per spatial dimension".into()));
    }
    if let PdeProblem::NavierStokes(_) = problem {
        let (a, b) = problem.bounds()[0];
        let xs = periodic_mesh(a, b, grid.space[0]);
        let ys = periodic_mesh(a, b, grid.space[1]);
        let pts: Vec<Vec<f64>> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| vec![x, y])).collect();
        let samples = McSamples {
            times: grid.times.clone(),
            space: vec![pts],
            volumes: vec![(b - a) * (b - a)],
        };
        return fourier_loss_mc(tape, problem, net, vars, &samples, weight, quantile);
    }
    let n = grid.space[0];
    let expect = grid_modes(problem, &grid.space)?;
    if weight.modes() != &expect[..] {
        return Err(Error::Shape(format!("weight modes do not match the {n}-point grid")));
    }
    let (bins, modes, vals) = retained(weight);
    if bins.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let (a, b) = problem.bounds()[0];
    let xs = periodic_mesh(a, b, n);
    let mut points = Vec::with_capacity(2 * n * grid.times.len());
    for &t in &grid.times {
        for &x in &xs {
            points.push(x);
            points.push(t);
        }
    }
    let op: Arc<dyn LinearOperator> = Arc::new(DftOperator::new(n, (b - a) / n as f64, bins)?);
    let r = scalar_weighted_residual(tape, problem, net, vars, &points, grid.times.len(), op, &modes, &vals)?;
    reduce(tape, r, quantile)
}

/// Monte-Carlo path: `(|Omega|/N) Phi` projections of the sampled fields onto
/// the retained modes of `weight`.
pub fn fourier_loss_mc(
    tape: &mut Tape,
    problem: &PdeProblem,
    net: &Network,
    vars: &[Var],
    samples: &McSamples,
    weight: &SpectralWeight,
    quantile: &QuantileSpec,
) -> Result<Var> {
    match fourier_residual_mc(tape, problem, net, vars, samples, weight)? {
        Some(r) => reduce(tape, r, quantile),
        None => Ok(tape.constant(Tensor::scalar(0.0))),
    }
}

/// Weighted spectral residual `W R^` `[times, retained modes]` from
/// Monte-Carlo samples; `None` when no mode is retained.
pub fn fourier_residual_mc(
    tape: &mut Tape,
    problem: &PdeProblem,
    net: &Network,
    vars: &[Var],
    samples: &McSamples,
    weight: &SpectralWeight,
) -> Result<Option<ComplexPair>> {
    samples.validate()?;
    let d = problem.spatial_dims();
    if weight.modes().iter().any(|m| m.len() != d) || samples.space[0][0].len() != d {
        return Err(Error::Shape(format!("modes and samples must be {d}-dimensional")));
    }
    let (_, modes, vals) = retained(weight);
    if modes.is_empty() {
        return Ok(None);
    }
    let r = match problem {
        PdeProblem::NavierStokes(_) => {
            // velocities are rebuilt from every mode of the box; the weight
            // selects which residual modes enter the loss
            let proj = samples.projection(weight.modes().to_vec())?;
            let full = ns_weighted_residual(tape, problem, net, vars, samples, &proj, weight.values())?;
            if modes.len() == weight.modes().len() {
                full
            } else {
                let keep = weight.retained_indices();
                let sel = Arc::new(SelectColumns::new(weight.modes().len(), keep));
                tape.linear_complex(sel, full)?
            }
        }
        _ => {
            let proj = samples.projection(modes.clone())?;
            let op: Arc<dyn LinearOperator> = Arc::new(proj);
            scalar_weighted_residual(tape, problem, net, vars, &samples.points(), samples.times.len(), op, &modes, &vals)?
        }
    };
    Ok(Some(r))
}

/// Column gather `[rows, n] -> [rows, keep.len()]`.
#[derive(Debug)]
struct SelectColumns {
    n: usize,
    keep: Vec<usize>,
}

impl SelectColumns {
    fn new(n: usize, keep: Vec<usize>) -> Self {
        Self { n, keep }
    }
}

impl LinearOperator for SelectColumns {
    fn in_len(&self) -> usize {
        self.n
    }

    fn out_len(&self) -> usize {
        self.keep.len()
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        let k = self.keep.len();
        for r in 0..rows {
            for (j, &c) in self.keep.iter().enumerate() {
                out_re[r * k + j] = re[r * self.n + c];
                out_im[r * k + j] = im.map_or(0.0, |im| im[r * self.n + c]);
            }
        }
    }

    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        let k = self.keep.len();
        out_re.iter_mut().chain(out_im.iter_mut()).for_each(|v| *v = 0.0);
        for r in 0..rows {
            for (j, &c) in self.keep.iter().enumerate() {
                out_re[r * self.n + c] += re[r * k + j];
                out_im[r * self.n + c] += im[r * k + j];
            }
        }
    }
}

/// One grad-norm balancing update.
///
/// `lambda_hat_i = (sum_k |g_k|) / |g_i|`, then
/// `lambda <- alpha lambda_hat + (1 - alpha) lambda_old`. A term whose
/// gradient norm is zero keeps its previous weight.
pub fn grad_norm_tune(norms: &[f64], previous: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if norms.len() != previous.len() || norms.is_empty() {
        return Err(Error::Shape("one gradient norm per weight is required".into()));
    }
    if norms.iter().any(|n| !n.is_finite() || *n < 0.0) {
        return Err(Error::Numerical(format!("non-finite gradient norms {norms:?}")));
    }
    let sum: f64 = norms.iter().sum();
    if sum == 0.0 {
        return Err(Error::Numerical("every gradient norm is zero".into()));
    }
    Ok(norms
        .iter()
        .zip(previous)
        .map(|(&g, &old)| if g == 0.0 { old } else { alpha * (sum / g) + (1.0 - alpha) * old })
        .collect())
}
