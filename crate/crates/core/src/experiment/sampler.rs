use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{SamplingConfig, SamplingMode};
use crate::losses::{BoundaryBatch, InitialBatch, McSamples};
use crate::pdezoo::{DomainShape, PdeProblem};
use crate::refsolve::SolutionGrid;
use crate::Result;

fn uniform(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    a + (b - a) * rng.random::<f64>()
}

/// Collocation, initial and boundary draws for one run.
pub(crate) struct Sampler {
    problem: PdeProblem,
    domain: DomainShape,
    cfg: SamplingConfig,
    fixed_space: Option<Vec<f64>>,
    fixed_points: Option<Vec<f64>>,
    fixed_initial: Option<InitialBatch>,
    fixed_boundary: Option<BoundaryBatch>,
}

impl Sampler {
    pub fn new(problem: &PdeProblem, domain: DomainShape, cfg: SamplingConfig) -> Self {
        Self {
            problem: problem.clone(),
            domain,
            cfg,
            fixed_space: None,
            fixed_points: None,
            fixed_initial: None,
            fixed_boundary: None,
        }
    }

    fn space_bounds(&self) -> Vec<(f64, f64)> {
        self.problem.bounds()
    }

    /// Time interval on which the slice through `x` lies inside the domain.
    fn time_range_at(&self, x: f64) -> (f64, f64) {
        let (t0, t1) = self.problem.time_bounds();
        match self.domain {
            DomainShape::Square => (t0, t1),
            DomainShape::Triangle => {
                let (a, b) = self.space_bounds()[0];
                let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
                let s = (2.0 * (1.0 - (x - c).abs() / h)).clamp(0.0, 1.0);
                (t0, t0 + (t1 - t0) * s)
            }
        }
    }

    fn draw_point(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let bounds = self.space_bounds();
        let time = self.problem.time_bounds();
        loop {
            let xs: Vec<f64> = bounds.iter().map(|&b| uniform(rng, b)).collect();
            let t = uniform(rng, time);
            if self.domain == DomainShape::Square || self.domain.contains(bounds[0], time, xs[0], t) {
                out.extend_from_slice(&xs);
                out.push(t);
                return;
            }
        }
    }

    fn draw_points(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * self.problem.input_dim());
        for _ in 0..n {
            self.draw_point(rng, &mut out);
        }
        out
    }

    /// `[N, input_dim]` collocation points.
    pub fn collocation(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.cfg.collocation;
        match self.cfg.mode {
            SamplingMode::Uniform => self.draw_points(n, rng),
            SamplingMode::Fixed => {
                if self.fixed_points.is_none() {
                    self.fixed_points = Some(self.draw_points(n, rng));
                }
                self.fixed_points.clone().expect("drawn")
            }
            SamplingMode::FixedSpace => {
                let d = self.problem.spatial_dims();
                if self.fixed_space.is_none() {
                    let bounds = self.space_bounds();
                    let xs = (0..n).flat_map(|_| bounds.iter().map(|&b| uniform(rng, b)).collect::<Vec<_>>()).collect();
                    self.fixed_space = Some(xs);
                }
                let xs = self.fixed_space.clone().expect("drawn");
                let mut out = Vec::with_capacity(n * (d + 1));
                for x in xs.chunks(d) {
                    out.extend_from_slice(x);
                    out.push(uniform(rng, self.time_range_at(x[0])));
                }
                out
            }
        }
    }

    fn draw_initial(&self, rng: &mut ChaCha8Rng, reference: &SolutionGrid) -> InitialBatch {
        let n = self.cfg.initial;
        let (t0, _) = self.problem.time_bounds();
        match &self.problem {
            PdeProblem::NavierStokes(_) => {
                // mesh nodes of the reference at the window start
                let axes = reference.axes();
                let (xs, ys) = (axes[0].coords(), axes[1].coords());
                let omega = reference.slice("omega", 0).expect("omega field");
                let psi = reference.slice("psi", 0).expect("psi field");
                let mut points = Vec::with_capacity(3 * n);
                let mut targets = Vec::with_capacity(2 * n);
                for _ in 0..n {
                    let (i, j) = (rng.random_range(0..ys.len()), rng.random_range(0..xs.len()));
                    points.extend_from_slice(&[xs[j], ys[i], t0]);
                    targets.extend_from_slice(&[psi[i * xs.len() + j], omega[i * xs.len() + j]]);
                }
                InitialBatch { points, targets }
            }
            p => {
                let pde = p.scalar().expect("scalar problem");
                let b = self.space_bounds()[0];
                let mut points = Vec::with_capacity(2 * n);
                let mut targets = Vec::with_capacity(n);
                for _ in 0..n {
                    let x = uniform(rng, b);
                    points.extend_from_slice(&[x, t0]);
                    targets.push(pde.initial(x));
                }
                InitialBatch { points, targets }
            }
        }
    }

    fn draw_boundary(&self, rng: &mut ChaCha8Rng, reference: &SolutionGrid) -> Result<BoundaryBatch> {
        let n = self.cfg.boundary;
        if n == 0 {
            return Ok(BoundaryBatch::None);
        }
        let time = self.problem.time_bounds();
        let bounds = self.space_bounds();
        let (mut left, mut right) = (Vec::new(), Vec::new());
        match (self.domain, self.problem.spatial_dims()) {
            (DomainShape::Triangle, _) => {
                let mut points = Vec::with_capacity(2 * n);
                let mut targets = Vec::with_capacity(n);
                for k in 0..n {
                    let t = uniform(rng, time);
                    let (a, b) = self.domain.slice(bounds[0], time, t);
                    let x = if k % 2 == 0 { a } else { b };
                    points.extend_from_slice(&[x, t]);
                    targets.push(reference.interpolate("u", x, t)?);
                }
                return Ok(BoundaryBatch::Dirichlet { points, targets });
            }
            (_, 1) => {
                let (a, b) = bounds[0];
                for _ in 0..n {
                    let t = uniform(rng, time);
                    left.extend_from_slice(&[a, t]);
                    right.extend_from_slice(&[b, t]);
                }
            }
            _ => {
                let (a, b) = bounds[0];
                for k in 0..n {
                    let s = uniform(rng, bounds[1]);
                    let t = uniform(rng, time);
                    if k % 2 == 0 {
                        left.extend_from_slice(&[a, s, t]);
                        right.extend_from_slice(&[b, s, t]);
                    } else {
                        left.extend_from_slice(&[s, a, t]);
                        right.extend_from_slice(&[s, b, t]);
                    }
                }
            }
        }
        Ok(BoundaryBatch::Periodic { left, right })
    }

    pub fn initial(&mut self, rng: &mut ChaCha8Rng, reference: &SolutionGrid) -> InitialBatch {
        if self.cfg.mode == SamplingMode::Uniform {
            return self.draw_initial(rng, reference);
        }
        if self.fixed_initial.is_none() {
            self.fixed_initial = Some(self.draw_initial(rng, reference));
        }
        self.fixed_initial.clone().expect("drawn")
    }

    pub fn boundary(&mut self, rng: &mut ChaCha8Rng, reference: &SolutionGrid) -> Result<BoundaryBatch> {
        if self.cfg.mode == SamplingMode::Uniform {
            return self.draw_boundary(rng, reference);
        }
        if self.fixed_boundary.is_none() {
            self.fixed_boundary = Some(self.draw_boundary(rng, reference)?);
        }
        Ok(self.fixed_boundary.clone().expect("drawn"))
    }

    /// Uniform time slices, each with its own uniform spatial set on the
    /// domain slice.
    pub fn mc_samples(&self, slices: usize, points: usize, rng: &mut ChaCha8Rng) -> McSamples {
        let time = self.problem.time_bounds();
        let bounds = self.space_bounds();
        let mut times: Vec<f64> = (0..slices).map(|_| uniform(rng, time)).collect();
        times.sort_by(f64::total_cmp);
        let mut space = Vec::with_capacity(slices);
        let mut volumes = Vec::with_capacity(slices);
        for &t in &times {
            let set: Vec<Vec<f64>> = match bounds.len() {
                1 => {
                    let (a, b) = self.domain.slice(bounds[0], time, t);
                    volumes.push(b - a);
                    (0..points).map(|_| vec![uniform(rng, (a, b))]).collect()
                }
                _ => {
                    volumes.push(bounds.iter().map(|(a, b)| b - a).product());
                    (0..points).map(|_| bounds.iter().map(|&b| uniform(rng, b)).collect()).collect()
                }
            };
            space.push(set);
        }
        McSamples { times, space, volumes }
    }
}
