//! Seeded training runs: the optimisation loop, periodic evaluation against
//! the reference solution and the files a run leaves behind.

mod config;
mod output;
mod sampler;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{
    EvalConfig, ExperimentConfig, FourierConfig, FourierPath, ReferenceConfig, ResolvedConfig, SamplingConfig,
    SamplingMode,
};
pub use output::{write_outputs, RunRecord, RUN_CSV_HEADER, TIMING_CSV_HEADER};

use crate::analysis::{error_power_spectrum, frequency_stats, radial_psd, relative_l2, ErrorPower, FrequencyStats, PsdCurve};
use crate::autodiff::{adam_step, AdamState, Tape, Tensor, Var};
use crate::jetnet::{JetPlan, Network};
use crate::losses::{
    boundary_initial_loss, fourier_loss_grid, fourier_loss_mc, grad_norm_tune, grid_modes, physics_loss, GridSpec,
    LossReport, LossTerms, McSamples,
};
use crate::pdezoo::{Derivs, DomainShape, PdeProblem};
use crate::refsolve::{solve, SolutionGrid, SolutionMeta};
use crate::spectral::{mode_box, positive_modes, sample_grid_size, SpectralWeight};
use crate::{Error, Result};
use sampler::Sampler;

/// RNG streams of one seed: parameters, collocation draws, Fourier draws.
const STREAM_INIT: u64 = 0;
const STREAM_COLLOCATION: u64 = 1;
const STREAM_FOURIER: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    /// `(iteration, seconds since start)` at every logged row.
    pub timing: Vec<(usize, f64)>,
    pub final_rel_l2: f64,
    pub psd: PsdCurve,
    pub stats: FrequencyStats,
    pub error_power: ErrorPower,
    pub prediction: SolutionGrid,
    pub network: Network,
}

/// Loads the configured reference solution or solves for it.
pub fn load_reference(resolved: &ResolvedConfig) -> Result<SolutionGrid> {
    let cfg = &resolved.config;
    let grid = match &cfg.reference.path {
        Some(p) => SolutionGrid::load(p)?,
        None => solve(&cfg.pde, &resolved.reference_solver)?,
    };
    check_reference(resolved, &grid)?;
    Ok(grid)
}

fn check_reference(resolved: &ResolvedConfig, grid: &SolutionGrid) -> Result<()> {
    let s = &resolved.reference_solver;
    let ok = grid.meta.problem == resolved.config.pde
        && grid.times().len() == s.samples
        && grid.axes().iter().all(|a| a.points == s.eval_points);
    if !ok {
        return Err(Error::Config(format!(
            "reference solution does not match the {} problem on a {}x{} eval mesh",
            resolved.config.pde.name(),
            s.eval_points,
            s.samples
        )));
    }
    Ok(())
}

/// Network output compared against the reference, and the reference field.
fn eval_field(problem: &PdeProblem) -> (usize, &'static str) {
    match problem {
        PdeProblem::NavierStokes(_) => (1, "omega"),
        _ => (0, "u"),
    }
}

fn output_names(problem: &PdeProblem) -> Vec<String> {
    match problem {
        PdeProblem::NavierStokes(_) => vec!["psi".into(), "omega".into()],
        _ => vec!["u".into()],
    }
}

/// Network outputs on the reference mesh, as a solution grid.
pub fn predict_on_mesh(net: &Network, reference: &SolutionGrid) -> Result<SolutionGrid> {
    const CHUNK: usize = 4096;
    let points = reference.input_points();
    let d = net.config().input_dim;
    let outs = net.config().output_dim;
    let rows = points.len() / d;
    let mut fields = vec![Vec::with_capacity(rows); outs];
    for chunk in points.chunks(CHUNK * d) {
        let y = net.predict(chunk)?;
        for r in y.data().chunks(outs) {
            for (f, v) in fields.iter_mut().zip(r) {
                f.push(*v);
            }
        }
    }
    let meta = SolutionMeta {
        fields: output_names(&reference.meta.problem),
        warnings: Vec::new(),
        ..reference.meta.clone()
    };
    Ok(SolutionGrid { meta, values: fields })
}

/// Mesh points of the reference inside the computational domain.
fn domain_mask(domain: DomainShape, reference: &SolutionGrid) -> Vec<bool> {
    let problem = &reference.meta.problem;
    let per = reference.points_per_slice();
    match domain {
        DomainShape::Square => vec![true; per * reference.times().len()],
        DomainShape::Triangle => {
            let xs = reference.axes()[0].coords();
            let (b, tb) = (problem.bounds()[0], problem.time_bounds());
            reference
                .times()
                .iter()
                .flat_map(|&t| xs.iter().map(move |&x| domain.contains(b, tb, x, t)))
                .collect()
        }
    }
}

/// Relative L2 error, error PSD, Table-1 statistics and error power.
pub struct Evaluation {
    pub rel_l2: f64,
    pub psd: PsdCurve,
    pub stats: FrequencyStats,
    pub error_power: ErrorPower,
}

pub fn evaluate(prediction: &SolutionGrid, reference: &SolutionGrid, domain: DomainShape) -> Result<Evaluation> {
    let (o, name) = eval_field(&reference.meta.problem);
    let mask = domain_mask(domain, reference);
    let truth: Vec<f64> = reference.field(name)?.iter().zip(&mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
    let approx: Vec<f64> = prediction.values[o].iter().zip(&mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
    let rel_l2 = relative_l2(&truth, &approx)?;
    let err: Vec<f64> = approx.iter().zip(&truth).map(|(a, b)| a - b).collect();
    let axes = reference.axes();
    let nt = reference.times().len();
    let psd = if axes.len() == 1 {
        radial_psd(&err, nt, axes[0].points)?
    } else {
        // average of the per-slice spatial spectra
        let (h, w) = (axes[1].points, axes[0].points);
        let mut acc: Option<PsdCurve> = None;
        for s in err.chunks(h * w) {
            let p = radial_psd(s, h, w)?;
            acc = Some(match acc {
                None => p,
                Some(mut a) => {
                    a.power.iter_mut().zip(&p.power).for_each(|(x, y)| *x += y);
                    a
                }
            });
        }
        let mut a = acc.expect("at least one slice");
        a.power.iter_mut().for_each(|x| *x /= nt as f64);
        a
    };
    let stats = if psd.power.iter().all(|&p| p == 0.0) {
        // exact prediction: every power term sits at the log floor
        let floor = crate::analysis::LOG_FLOOR.ln();
        FrequencyStats {
            total_log_power: floor,
            average_log_power: floor,
            frequency_50: 0.0,
            frequency_90: 0.0,
            ratio_low: 0.0,
            ratio_mid: 0.0,
            ratio_high: 0.0,
        }
    } else {
        frequency_stats(&psd)?
    };
    let space: Vec<usize> = axes.iter().map(|a| a.points).collect();
    let lengths: Vec<f64> = axes.iter().map(|a| a.length).collect();
    let error_power = error_power_spectrum(&truth, &approx, &space, &lengths)?;
    Ok(Evaluation {
        rel_l2,
        psd,
        stats,
        error_power,
    })
}

/// Fourier term of one step: the mesh or sample draw and its weight.
enum FourierDraw {
    Grid { spec: GridSpec, weight: SpectralWeight },
    Mc { samples: McSamples },
}

struct FourierState {
    /// Weight on the fixed mode set (mc path and Navier-Stokes).
    fixed_weight: Option<SpectralWeight>,
    fixed_samples: Option<McSamples>,
}

fn cutoff(problem: &PdeProblem, max_mode: Option<usize>) -> Option<f64> {
    max_mode.map(|k| k as f64 / problem.lengths()[0])
}

fn fixed_modes(problem: &PdeProblem, max_mode: usize) -> Vec<Vec<f64>> {
    match problem {
        PdeProblem::NavierStokes(_) => mode_box(max_mode, &problem.lengths()),
        _ => positive_modes(max_mode, problem.lengths()[0]),
    }
}

struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    reference: &'a SolutionGrid,
    physics_plan: Arc<JetPlan>,
    sampler: Sampler,
    fourier: FourierState,
    rng_points: ChaCha8Rng,
    rng_fourier: ChaCha8Rng,
    /// Tuned multipliers of the configured weights.
    factors: [f64; 3],
}

impl<'a> Trainer<'a> {
    fn fourier_active(&self) -> bool {
        self.cfg.loss.fourier > 0.0 && self.cfg.fourier.path != FourierPath::Off
    }

    fn draw_fourier(&mut self) -> Result<(FourierDraw, String)> {
        let f = &self.cfg.fourier;
        let problem = &self.cfg.pde;
        let (t0, t1) = problem.time_bounds();
        match f.path {
            FourierPath::Grid => {
                let sizes = sample_grid_size(&f.grid_size, &mut self.rng_fourier)?;
                let label = sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x");
                let weight = match (&self.fourier.fixed_weight, problem) {
                    (Some(w), PdeProblem::NavierStokes(_)) => w.clone(),
                    _ => SpectralWeight::build(&f.symbol, &grid_modes(problem, &sizes)?, cutoff(problem, f.max_mode), f.normalization)?,
                };
                let spec = GridSpec {
                    space: sizes,
                    times: GridSpec::slices(t0, t1, f.time_slices),
                };
                Ok((FourierDraw::Grid { spec, weight }, label))
            }
            FourierPath::Mc => {
                let samples = match (&self.fourier.fixed_samples, self.cfg.sampling.mode) {
                    (Some(s), SamplingMode::Fixed) => s.clone(),
                    _ => {
                        let s = self.sampler.mc_samples(f.time_slices, f.mc_points, &mut self.rng_fourier);
                        if self.cfg.sampling.mode == SamplingMode::Fixed {
                            self.fourier.fixed_samples = Some(s.clone());
                        }
                        s
                    }
                };
                Ok((FourierDraw::Mc { samples }, format!("{}", f.mc_points)))
            }
            FourierPath::Off => unreachable!("inactive Fourier term"),
        }
    }

    /// Builds every loss term of one step on `tape`.
    fn build(&mut self, tape: &mut Tape, net: &Network, vars: &[Var]) -> Result<(LossTerms, String)> {
        let points = self.sampler.collocation(&mut self.rng_points);
        let jet = net.forward_jet(tape, vars, &points, &self.physics_plan)?;
        let d = Derivs::from_jet(tape, &jet)?;
        let (physics, compatibility) = physics_loss(tape, &self.cfg.pde, &d)?;
        let initial = self.sampler.initial(&mut self.rng_points, self.reference);
        let boundary = self.sampler.boundary(&mut self.rng_points, self.reference)?;
        let (initial, boundary) = boundary_initial_loss(tape, net, vars, &initial, &boundary)?;
        let mut label = String::new();
        let fourier = if self.fourier_active() {
            let (draw, l) = self.draw_fourier()?;
            label = l;
            let q = &self.cfg.quantile;
            Some(match draw {
                FourierDraw::Grid { spec, weight } => fourier_loss_grid(tape, &self.cfg.pde, net, vars, &spec, &weight, q)?,
                FourierDraw::Mc { samples } => {
                    let w = self.fourier.fixed_weight.as_ref().expect("mc weight");
                    fourier_loss_mc(tape, &self.cfg.pde, net, vars, &samples, w, q)?
                }
            })
        } else {
            None
        };
        Ok((
            LossTerms {
                physics,
                compatibility,
                initial,
                boundary,
                fourier,
            },
            label,
        ))
    }

    fn lambda(&self) -> [f64; 3] {
        let w = &self.cfg.loss;
        [w.physics * self.factors[0], w.boundary * self.factors[1], w.fourier * self.factors[2]]
    }

    /// Gradient-norm rebalancing over the terms that carry weight.
    fn tune(&mut self, tape: &mut Tape, terms: &LossTerms, vars: &[Var]) -> Result<[f64; 3]> {
        let w = &self.cfg.loss;
        let groups = [
            (w.physics > 0.0).then(|| terms.physics_group(tape)).transpose()?,
            (w.boundary > 0.0).then(|| terms.boundary_group(tape)).transpose()?,
            if w.fourier > 0.0 { terms.fourier } else { None },
        ];
        let mut norms = [0.0; 3];
        let mut active = Vec::new();
        for (i, g) in groups.iter().enumerate() {
            if let Some(g) = g {
                let grads = tape.backward(*g)?;
                norms[i] = vars
                    .iter()
                    .filter_map(|&v| grads.get(v))
                    .flat_map(|t| t.data().iter())
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                active.push(i);
            }
        }
        if let crate::losses::WeightMode::GradNorm { alpha, .. } = w.mode {
            let n: Vec<f64> = active.iter().map(|&i| norms[i]).collect();
            let prev: Vec<f64> = active.iter().map(|&i| self.factors[i]).collect();
            let next = grad_norm_tune(&n, &prev, alpha)?;
            for (&i, v) in active.iter().zip(next) {
                self.factors[i] = v;
            }
        }
        Ok(norms)
    }
}

fn finite_grads(g: &[Tensor]) -> bool {
    g.iter().all(|t| t.data().iter().all(|v| v.is_finite()))
}

/// One seeded training run. Writes the run files to `out` when given.
pub fn train(resolved: &ResolvedConfig, seed: u64, reference: &SolutionGrid, out: Option<&Path>) -> Result<RunSummary> {
    check_reference(resolved, reference)?;
    let cfg = &resolved.config;
    let mut net = Network::init(cfg.network.clone(), &mut rng(seed, STREAM_INIT))?;
    let fixed_weight = match (&cfg.pde, cfg.fourier.path, cfg.fourier.max_mode) {
        (PdeProblem::NavierStokes(_), FourierPath::Grid | FourierPath::Mc, Some(k)) | (_, FourierPath::Mc, Some(k)) => {
            Some(SpectralWeight::build(&cfg.fourier.symbol, &fixed_modes(&cfg.pde, k), cutoff(&cfg.pde, Some(k)), cfg.fourier.normalization)?)
        }
        _ => None,
    };
    let mut trainer = Trainer {
        cfg,
        reference,
        physics_plan: Arc::new(resolved.physics_jet.plan()?),
        sampler: Sampler::new(&cfg.pde, cfg.domain, cfg.sampling),
        fourier: FourierState {
            fixed_weight,
            fixed_samples: None,
        },
        rng_points: rng(seed, STREAM_COLLOCATION),
        rng_fourier: rng(seed, STREAM_FOURIER),
        factors: [1.0; 3],
    };
    let mut adam = AdamState::new(net.params());
    let mut records = Vec::new();
    let mut timing = Vec::new();
    let mut last_good = net.clone();
    let start = Instant::now();
    let ckpt_hash = crate::jetnet::config_hash(serde_json::to_string(resolved).map_err(|e| Error::Serde(e.to_string()))?.as_bytes());
    let tune_every = match cfg.loss.mode {
        crate::losses::WeightMode::GradNorm { every, .. } => Some(every),
        crate::losses::WeightMode::Fixed => None,
    };
    let mut last_eval = None;

    for step in 0..=cfg.iterations {
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape);
        let (terms, label) = trainer.build(&mut tape, &net, &vars)?;
        let norms = match tune_every {
            Some(every) if step < cfg.iterations && step % every == 0 => Some(trainer.tune(&mut tape, &terms, &vars)?),
            _ => None,
        };
        let lambda = trainer.lambda();
        let (total, mut report): (Var, LossReport) = terms.total(&mut tape, lambda)?;
        report.grad_norms = norms;
        let evaluate_now = step % cfg.eval.every == 0 || step == cfg.iterations;
        let rel_l2 = if evaluate_now {
            let pred = predict_on_mesh(&net, reference)?;
            let e = evaluate(&pred, reference, cfg.domain)?;
            last_eval = Some((e, pred));
            Some(last_eval.as_ref().expect("set").0.rel_l2)
        } else {
            None
        };
        if evaluate_now || step % cfg.eval.log_every == 0 {
            records.push(RunRecord {
                iteration: step,
                report: report.clone(),
                rel_l2,
                grid_size: label,
                lambda,
            });
            timing.push((step, start.elapsed().as_secs_f64()));
        }
        let mut abort = None;
        if !report.total.is_finite() {
            abort = Some(format!("non-finite loss {} at step {step}", report.total));
        }
        let mut grads = Vec::new();
        if abort.is_none() && step < cfg.iterations {
            let g = tape.backward(total)?;
            grads = vars
                .iter()
                .zip(net.params())
                .map(|(&v, p)| g.get_or_zeros(v, p.shape()))
                .collect();
            if !finite_grads(&grads) {
                abort = Some(format!("non-finite gradient at step {step}"));
            }
        }
        if let Some(msg) = abort {
            if let Some(dir) = out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                last_good.save(&dir.join("checkpoint.bin"), seed, &ckpt_hash, step.saturating_sub(1) as u64)?;
                output::write_records(dir, &records, &timing)?;
            }
            return Err(Error::Numerical(format!("{msg}; last good parameters saved")));
        }
        if step == cfg.iterations {
            break;
        }
        last_good = net.clone();
        adam_step(net.params_mut(), &grads, &mut adam, &cfg.optimizer)?;
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                net.save(&dir.join("checkpoint.bin"), seed, &ckpt_hash, (step + 1) as u64)?;
            }
        }
    }

    let (e, prediction) = last_eval.expect("final step evaluates");
    let summary = RunSummary {
        seed,
        records,
        timing,
        final_rel_l2: e.rel_l2,
        psd: e.psd,
        stats: e.stats,
        error_power: e.error_power,
        prediction,
        network: net,
    };
    if let Some(dir) = out {
        let mut r = resolved.clone();
        r.config.seeds = vec![seed];
        write_outputs(dir, &r, &summary)?;
        summary
            .network
            .save(&dir.join("checkpoint.bin"), seed, &ckpt_hash, cfg.iterations as u64)?;
    }
    Ok(summary)
}

/// Output directory of `seed`: the root for single-seed configs, else
/// `root/seed_<seed>`.
pub fn run_dir(root: &Path, seeds: &[u64], seed: u64) -> PathBuf {
    if seeds.len() == 1 {
        root.to_path_buf()
    } else {
        root.join(format!("seed_{seed}"))
    }
}

/// Every configured seed in turn, sharing one reference solution.
pub fn run_experiment(resolved: &ResolvedConfig) -> Result<Vec<RunSummary>> {
    let reference = load_reference(resolved)?;
    let root = &resolved.config.output;
    let seeds = &resolved.config.seeds;
    seeds
        .iter()
        .map(|&s| train(resolved, s, &reference, Some(&run_dir(root, seeds, s))))
        .collect()
}

#[cfg(test)]
mod tests;
