//! Pseudo-spectral reference solutions: integrating-factor RK4 on periodic
//! meshes with zero-padding dealiasing.

mod dealias;
mod stepper;

use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dealias::{padded_len, Padded1, Padded2};
pub use stepper::Integrator;
use stepper::{steps_for, Stepper};

use crate::pdezoo::{ns_initial_condition, NavierStokes, PdeProblem, ScalarPde};
use crate::spectral::fftfreq;
use crate::{Error, Result};

pub const BLOWUP: f64 = 1e6;
/// Mesh on which the random Navier-Stokes initial vorticity is drawn before
/// spectral interpolation to the solver resolution.
pub const NS_IC_GRID: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Points per spatial dimension of the solver mesh.
    pub resolution: usize,
    pub dt: f64,
    pub integrator: Integrator,
    /// Output time slices, both ends of the window included.
    pub samples: usize,
    /// Output points per spatial dimension; must divide `resolution`.
    pub eval_points: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            resolution: 512,
            dt: 1e-4,
            integrator: Integrator::IfRk4,
            samples: 101,
            eval_points: 256,
        }
    }
}

impl SolveConfig {
    pub fn for_problem(problem: &PdeProblem) -> Self {
        match problem {
            PdeProblem::Burgers(_) => Self {
                resolution: 1024,
                ..Self::default()
            },
            PdeProblem::AllenCahn(_) => Self {
                resolution: 2048,
                ..Self::default()
            },
            PdeProblem::NavierStokes(_) => Self {
                resolution: 128,
                dt: 5e-4,
                eval_points: 64,
                ..Self::default()
            },
            _ => Self::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 4 || !(self.dt > 0.0) || self.samples < 2 || self.eval_points == 0 {
            return Err(Error::Config("reference solve needs resolution >= 4, dt > 0, samples >= 2".into()));
        }
        if self.resolution % self.eval_points != 0 {
            return Err(Error::Config(format!(
                "eval points {} must divide the resolution {}",
                self.eval_points, self.resolution
            )));
        }
        Ok(())
    }
}

/// One uniform periodic axis: `start + j * length / points`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshAxis {
    pub start: f64,
    pub length: f64,
    pub points: usize,
}

impl MeshAxis {
    pub fn coords(&self) -> Vec<f64> {
        (0..self.points)
            .map(|j| self.start + self.length * j as f64 / self.points as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub problem: PdeProblem,
    pub resolution: usize,
    pub dt: f64,
    pub integrator: Integrator,
    pub seed: Option<u64>,
    pub space: Vec<MeshAxis>,
    pub times: Vec<f64>,
    pub fields: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Reference fields on a space-time mesh, each row-major `[time][x]` or
/// `[time][y][x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionGrid {
    pub meta: SolutionMeta,
    pub values: Vec<Vec<f64>>,
}

impl SolutionGrid {
    pub fn times(&self) -> &[f64] {
        &self.meta.times
    }

    pub fn axes(&self) -> &[MeshAxis] {
        &self.meta.space
    }

    pub fn points_per_slice(&self) -> usize {
        self.meta.space.iter().map(|a| a.points).product()
    }

    pub fn field(&self, name: &str) -> Result<&[f64]> {
        self.meta
            .fields
            .iter()
            .position(|f| f == name)
            .map(|i| self.values[i].as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("solution has no field `{name}`")))
    }

    pub fn slice(&self, name: &str, ti: usize) -> Result<&[f64]> {
        let p = self.points_per_slice();
        let f = self.field(name)?;
        f.get(ti * p..(ti + 1) * p)
            .ok_or_else(|| Error::InvalidArgument(format!("time index {ti} out of range")))
    }

    /// Network inputs `(x[, y], t)` for every mesh node in storage order.
    pub fn input_points(&self) -> Vec<f64> {
        let axes: Vec<Vec<f64>> = self.meta.space.iter().map(MeshAxis::coords).collect();
        let mut out = Vec::new();
        for &t in &self.meta.times {
            match axes.len() {
                1 => {
                    for &x in &axes[0] {
                        out.extend_from_slice(&[x, t]);
                    }
                }
                _ => {
                    for &y in &axes[1] {
                        for &x in &axes[0] {
                            out.extend_from_slice(&[x, y, t]);
                        }
                    }
                }
            }
        }
        out
    }

    /// 1-D field value at `(x, t)`: periodic cubic Lagrange in space, linear
    /// in time.
    pub fn interpolate(&self, name: &str, x: f64, t: f64) -> Result<f64> {
        if self.meta.space.len() != 1 {
            return Err(Error::Unsupported("interpolation is implemented for 1-D fields".into()));
        }
        let ax = &self.meta.space[0];
        let times = &self.meta.times;
        let (t0, t1) = (times[0], times[times.len() - 1]);
        if !(t0 - 1e-12..=t1 + 1e-12).contains(&t) {
            return Err(Error::InvalidArgument(format!("time {t} outside [{t0}, {t1}]")));
        }
        let s = ((t - t0) / (t1 - t0) * (times.len() - 1) as f64).clamp(0.0, (times.len() - 1) as f64);
        let i0 = (s.floor() as usize).min(times.len() - 2);
        let w = s - i0 as f64;
        let n = ax.points;
        let pos = (x - ax.start) / ax.length * n as f64;
        let j = pos.floor();
        let f = pos - j;
        let at = |ti: usize| -> Result<f64> {
            let row = self.slice(name, ti)?;
            let v = |k: i64| row[(j as i64 + k).rem_euclid(n as i64) as usize];
            let c = [
                -f * (f - 1.0) * (f - 2.0) / 6.0,
                (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
                -(f + 1.0) * f * (f - 2.0) / 2.0,
                (f + 1.0) * f * (f - 1.0) / 6.0,
            ];
            Ok(c[0] * v(-1) + c[1] * v(0) + c[2] * v(1) + c[3] * v(2))
        };
        Ok((1.0 - w) * at(i0)? + w * at(i0 + 1)?)
    }

    fn file(dir: &Path, stem: &str, suffix: &str) -> PathBuf {
        dir.join(format!("{stem}{suffix}"))
    }

    /// `<stem>.json` metadata, little-endian f64 data (`<stem>.bin`, or
    /// `<stem>.<field>.bin` when there are several fields) and
    /// `<stem>.csv` (`t,x,<fields>`) for 1-D solutions.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::Serde(e.to_string()))?;
        let p = Self::file(dir, stem, ".json");
        fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
        for (name, v) in self.meta.fields.iter().zip(&self.values) {
            let p = Self::file(dir, stem, &bin_suffix(&self.meta, name));
            let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        }
        if self.meta.space.len() == 1 {
            let p = Self::file(dir, stem, ".csv");
            let mut out = String::from("t,x");
            for f in &self.meta.fields {
                out.push(',');
                out.push_str(f);
            }
            out.push('\n');
            let xs = self.meta.space[0].coords();
            for (ti, t) in self.meta.times.iter().enumerate() {
                for (j, x) in xs.iter().enumerate() {
                    out.push_str(&format!("{t},{x}"));
                    for v in &self.values {
                        out.push_str(&format!(",{}", v[ti * xs.len() + j]));
                    }
                    out.push('\n');
                }
            }
            let mut fh = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            fh.write_all(out.as_bytes()).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Reads the files written by [`SolutionGrid::save`] given the JSON path.
    pub fn load(json: &Path) -> Result<Self> {
        let text = fs::read_to_string(json).map_err(|e| Error::io(json, e))?;
        let meta: SolutionMeta = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        let dir = json.parent().unwrap_or(Path::new("."));
        let stem = json
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidArgument(format!("bad solution path {}", json.display())))?;
        let expect = meta.times.len() * meta.space.iter().map(|a| a.points).product::<usize>();
        let mut values = Vec::new();
        for name in &meta.fields {
            let p = Self::file(dir, stem, &bin_suffix(&meta, name));
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if bytes.len() != 8 * expect {
                return Err(Error::Shape(format!("{} holds {} bytes, expected {}", p.display(), bytes.len(), 8 * expect)));
            }
            values.push(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            );
        }
        Ok(Self { meta, values })
    }
}

/// `stem.bin` for a single field, `stem.<field>.bin` otherwise.
fn bin_suffix(meta: &SolutionMeta, field: &str) -> String {
    if meta.fields.len() == 1 {
        ".bin".to_string()
    } else {
        format!(".{field}.bin")
    }
}

fn check_finite(t: f64, u: &[f64]) -> Result<()> {
    let peak = u.iter().fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
    if peak > BLOWUP {
        return Err(Error::Numerical(format!("reference solution blew up at t = {t}: max |u| = {peak:e}")));
    }
    Ok(())
}

fn sample_times(window: (f64, f64), samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (samples - 1) as f64)
        .collect()
}

/// Integrates from `t = 0` and records the state at each time of `times`
/// (ascending, nonnegative).
fn march(
    stepper: &Stepper,
    state: &mut Vec<Complex64>,
    times: &[f64],
    nl: &mut dyn FnMut(&[Complex64]) -> Vec<Complex64>,
    record: &mut dyn FnMut(f64, &[Complex64]) -> Result<()>,
) -> Result<()> {
    let mut now = 0.0;
    for &t in times {
        for _ in 0..steps_for(t - now, stepper.dt())? {
            stepper.step(state, nl);
        }
        now = t;
        record(t, state)?;
    }
    Ok(())
}

/// Scalar 1-D solve from mesh values `u0` at `t = 0`; returns the states on
/// the solver mesh at `times`.
pub fn solve_scalar(pde: &dyn ScalarPde, u0: &[f64], dt: f64, integrator: Integrator, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = u0.len();
    let (a, b) = pde.bounds();
    let xi = fftfreq(n, b - a);
    let pad = Padded1::new(n, padded_len(n, pde.nonlinear_degree()));
    let (lin, mnl): (Vec<Complex64>, Vec<Complex64>) = xi.iter().map(|&k| pde.multipliers(k)).unzip();
    let ik: Vec<Complex64> = xi.iter().map(|&k| Complex64::new(0.0, 2.0 * PI * k)).collect();
    let needs_ux = pde.nonlinear_needs_ux();
    let mut nl = |uh: &[Complex64]| -> Vec<Complex64> {
        let u = pad.to_fine(uh);
        let ux = if needs_ux {
            let d: Vec<Complex64> = uh.iter().zip(&ik).map(|(z, k)| z * k).collect();
            pad.to_fine(&d)
        } else {
            Vec::new()
        };
        let f = pde.nonlinear_values(&u, &ux);
        pad.from_fine(&f).iter().zip(&mnl).map(|(z, m)| z * m).collect()
    };
    let stepper = Stepper::new(lin, dt, integrator);
    let mut state = pad.to_spectral(u0);
    if n % 2 == 0 {
        state[n / 2] = Complex64::new(0.0, 0.0);
    }
    let mut out = Vec::with_capacity(times.len());
    march(&stepper, &mut state, times, &mut nl, &mut |t, s| {
        let u = pad.to_physical(s);
        check_finite(t, &u)?;
        out.push(u);
        Ok(())
    })?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsRun {
    pub nu: f64,
    pub dt: f64,
    pub integrator: Integrator,
    /// Drop the advection term (pure viscous decay).
    pub advection: bool,
}

/// Angular wavenumbers `2 pi k / L` of an `n`-point axis of the box.
fn kappa(n: usize, length: f64) -> Vec<f64> {
    fftfreq(n, length).into_iter().map(|x| 2.0 * PI * x).collect()
}

/// Vorticity-stream solve on the `n x n` box of side `length` from
/// `omega0` (row-major `[y][x]`); returns `(omega, psi)` states at `times`.
#[allow(clippy::type_complexity)]
pub fn ns_solve(omega0: &[f64], n: usize, length: f64, run: &NsRun, times: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if omega0.len() != n * n {
        return Err(Error::Shape(format!("initial vorticity has {} values, expected {n}x{n}", omega0.len())));
    }
    let k = kappa(n, length);
    let pad = Padded2::new(n, padded_len(n, 2));
    let mut k2 = vec![0.0; n * n];
    let mut lin = vec![Complex64::new(0.0, 0.0); n * n];
    for iy in 0..n {
        for ix in 0..n {
            let s = k[ix] * k[ix] + k[iy] * k[iy];
            k2[iy * n + ix] = s;
            lin[iy * n + ix] = Complex64::new(run.nu * s, 0.0);
        }
    }
    let inv_k2: Vec<f64> = k2.iter().map(|&s| if s == 0.0 { 0.0 } else { 1.0 / s }).collect();
    let i = Complex64::new(0.0, 1.0);
    let advect = run.advection;
    let mut nl = |w: &[Complex64]| -> Vec<Complex64> {
        if !advect {
            return vec![Complex64::new(0.0, 0.0); n * n];
        }
        let mut uh = vec![Complex64::new(0.0, 0.0); n * n];
        let mut vh = uh.clone();
        let mut wxh = uh.clone();
        let mut wyh = uh.clone();
        for iy in 0..n {
            for ix in 0..n {
                let j = iy * n + ix;
                let psi = w[j] * inv_k2[j];
                uh[j] = i * k[iy] * psi;
                vh[j] = -i * k[ix] * psi;
                wxh[j] = i * k[ix] * w[j];
                wyh[j] = i * k[iy] * w[j];
            }
        }
        let (u, v, wx, wy) = (pad.to_fine(&uh), pad.to_fine(&vh), pad.to_fine(&wxh), pad.to_fine(&wyh));
        let adv: Vec<f64> = (0..u.len()).map(|j| u[j] * wx[j] + v[j] * wy[j]).collect();
        pad.from_fine(&adv)
    };
    let stepper = Stepper::new(lin, run.dt, run.integrator);
    let mut state = pad.to_spectral(omega0);
    if n % 2 == 0 {
        for j in 0..n {
            state[(n / 2) * n + j] = Complex64::new(0.0, 0.0);
            state[j * n + n / 2] = Complex64::new(0.0, 0.0);
        }
    }
    let mut omega = Vec::with_capacity(times.len());
    let mut psi = Vec::with_capacity(times.len());
    march(&stepper, &mut state, times, &mut nl, &mut |t, s| {
        let w = pad.to_physical(s);
        check_finite(t, &w)?;
        let ph: Vec<Complex64> = s.iter().zip(&inv_k2).map(|(z, c)| z * c).collect();
        omega.push(w);
        psi.push(pad.to_physical(&ph));
        Ok(())
    })?;
    Ok((omega, psi))
}

/// Initial vorticity of `ns` on the `n x n` solver mesh: drawn on the
/// [`NS_IC_GRID`] mesh from `ic_seed`, then spectrally interpolated so every
/// resolution sees the same band-limited field.
pub fn ns_reference_initial(ns: &NavierStokes, n: usize) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(ns.ic_seed);
    let base = ns_initial_condition(&mut rng, NS_IC_GRID, ns.ic_cutoff, ns.ic_rms)?;
    if n == NS_IC_GRID {
        return Ok(base);
    }
    if n > NS_IC_GRID {
        let p = Padded2::new(NS_IC_GRID, n);
        let hat = p.to_spectral(&base);
        // to_fine normalizes by the coarse size, which keeps point values
        Ok(p.to_fine(&hat))
    } else {
        let p = Padded2::new(n, NS_IC_GRID);
        Ok(p.to_physical(&p.from_fine(&base)))
    }
}

fn downsample_1d(u: &[f64], stride: usize) -> impl Iterator<Item = f64> + '_ {
    u.iter().step_by(stride).copied()
}

fn downsample_2d(u: &[f64], n: usize, stride: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for iy in (0..n).step_by(stride) {
        out.extend(u[iy * n..(iy + 1) * n].iter().step_by(stride));
    }
    out
}

fn cfl_warning(speed: f64, dt: f64, dx: f64) -> Option<String> {
    let c = speed * dt / dx;
    (c > 1.0).then(|| format!("advective CFL number {c:.2} exceeds 1; the run may be unstable"))
}

/// Reference solution of `problem` over its time window, downsampled to the
/// evaluation mesh.
pub fn solve(problem: &PdeProblem, cfg: &SolveConfig) -> Result<SolutionGrid> {
    cfg.validate()?;
    let n = cfg.resolution;
    let stride = n / cfg.eval_points;
    let window = problem.time_bounds();
    let times = sample_times(window, cfg.samples);
    let bounds = problem.bounds();
    let axis = |(a, b): (f64, f64)| MeshAxis {
        start: a,
        length: b - a,
        points: cfg.eval_points,
    };
    let mut warnings = Vec::new();
    let (fields, values, space, seed) = match problem {
        PdeProblem::NavierStokes(ns) => {
            let l = ns.length();
            let w0 = ns_reference_initial(ns, n)?;
            let run = NsRun {
                nu: ns.nu,
                dt: cfg.dt,
                integrator: cfg.integrator,
                advection: true,
            };
            let peak = w0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // |u| <= |omega|_max * L / (2 pi) for the lowest mode
            warnings.extend(cfl_warning(peak * l / (2.0 * PI), cfg.dt, l / n as f64));
            let (om, ps) = ns_solve(&w0, n, l, &run, &times)?;
            let flat = |s: Vec<Vec<f64>>| s.iter().flat_map(|u| downsample_2d(u, n, stride)).collect::<Vec<f64>>();
            (
                vec!["omega".to_string(), "psi".to_string()],
                vec![flat(om), flat(ps)],
                vec![axis(bounds[0]), axis(bounds[1])],
                Some(ns.ic_seed),
            )
        }
        _ => {
            let pde = problem.scalar().expect("scalar problem");
            let (a, b) = bounds[0];
            let xs: Vec<f64> = (0..n).map(|j| a + (b - a) * j as f64 / n as f64).collect();
            let u0: Vec<f64> = xs.iter().map(|&x| pde.initial(x)).collect();
            let peak = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            warnings.extend(cfl_warning(peak, cfg.dt, (b - a) / n as f64));
            let states = solve_scalar(pde, &u0, cfg.dt, cfg.integrator, &times)?;
            let flat: Vec<f64> = states.iter().flat_map(|u| downsample_1d(u, stride)).collect();
            (vec!["u".to_string()], vec![flat], vec![axis(bounds[0])], None)
        }
    };
    Ok(SolutionGrid {
        meta: SolutionMeta {
            problem: problem.clone(),
            resolution: n,
            dt: cfg.dt,
            integrator: cfg.integrator,
            seed,
            space,
            times,
            fields,
            warnings,
        },
        values,
    })
}
