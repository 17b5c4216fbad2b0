mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fourier_pinn::analysis::{error_power_csv, ntk_probe, psd_csv, FrequencyStats};
use fourier_pinn::experiment::{evaluate, load_reference, run_dir, run_experiment, ExperimentConfig, FourierPath, ResolvedConfig};
use fourier_pinn::jetnet::Network;
use fourier_pinn::losses::McSamples;
use fourier_pinn::pdezoo::PdeProblem;
use fourier_pinn::refsolve::{solve, SolutionGrid};
use fourier_pinn::spectral::{mode_box, positive_modes};
use fourier_pinn::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "fpinn", version, about = "Fourier-enhanced PINN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write the run files.
    Train(Common),
    /// Solve and save the reference solution of a configuration.
    SolveReference(Common),
    /// Recompute psd.csv, stats.csv and error_power.csv for a finished run.
    AnalyzePsd {
        /// Run directory holding field.json and config.resolved.json.
        #[arg(long)]
        run: PathBuf,
        /// Saved reference (.json); solved from the run config when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Output directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tangent kernel of the Fourier residual, unweighted and weighted by the symbol.
    NtkProbe {
        #[command(flatten)]
        common: Common,
        /// Network checkpoint; a fresh seeded network when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides the configured width.
        #[arg(long)]
        width: Option<usize>,
        /// Overrides the configured depth.
        #[arg(long)]
        depth: Option<usize>,
        /// Largest integer wavenumber probed.
        #[arg(long, default_value_t = 16)]
        modes: usize,
        /// Spatial sample points of the probe slice.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Time of the probe slice; the middle of the window when absent.
        #[arg(long)]
        time: Option<f64>,
    },
    /// FFT, Parseval, jet and adjoint checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config, or a config.resolved.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Runs only this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Problem with default coefficients: burgers, allen_cahn, kdv or navier_stokes.
    #[arg(long)]
    pde: Option<String>,
    #[arg(long, value_parser = ["grid", "mc", "off"])]
    fourier: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<ResolvedConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(name) = &self.pde {
            let pde = PdeProblem::by_name(name)?;
            if pde.name() != cfg.pde.name() {
                // mesh sizes are per spatial dimension
                cfg.fourier.grid_size.clear();
            }
            cfg.pde = pde;
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(f) = &self.fourier {
            cfg.fourier.path = FourierPath::parse(f)?;
        }
        let r = cfg.resolve()?;
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
        Ok(r)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn train(common: &Common) -> Result<()> {
    let r = common.resolve()?;
    let runs = run_experiment(&r)?;
    for s in &runs {
        println!(
            "seed {}: relative L2 {:.4e} -> {}",
            s.seed,
            s.final_rel_l2,
            run_dir(&r.config.output, &r.config.seeds, s.seed).display()
        );
    }
    Ok(())
}

fn solve_reference(common: &Common) -> Result<()> {
    let r = common.resolve()?;
    let grid = solve(&r.config.pde, &r.reference_solver)?;
    let dir = &r.config.output;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    grid.save(dir, "reference")?;
    println!("{}", dir.join("reference.json").display());
    Ok(())
}

fn analyze_psd(run: &Path, reference: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(&run.join("config.resolved.json"))?;
    if let Some(p) = reference {
        cfg.reference.path = Some(p.to_path_buf());
    }
    let r = cfg.resolve()?;
    let reference = load_reference(&r)?;
    let prediction = SolutionGrid::load(&run.join("field.json"))?;
    let e = evaluate(&prediction, &reference, r.config.domain)?;
    let dir = out.unwrap_or(run);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("psd.csv"), &psd_csv(&e.psd))?;
    let stats = format!("{}\n{}\n", FrequencyStats::CSV_HEADER, e.stats.csv_row());
    write(&dir.join("stats.csv"), &stats)?;
    write(&dir.join("error_power.csv"), &error_power_csv(&e.error_power))?;
    println!("relative L2 {:.6e}", e.rel_l2);
    print!("{stats}");
    Ok(())
}

struct Probe {
    checkpoint: Option<PathBuf>,
    width: Option<usize>,
    depth: Option<usize>,
    modes: usize,
    samples: usize,
    time: Option<f64>,
}

fn probe(common: &Common, p: &Probe) -> Result<()> {
    let r = common.resolve()?;
    let cfg = &r.config;
    let seed = cfg.seeds[0];
    let mut net_cfg = cfg.network.clone();
    if let Some(w) = p.width {
        net_cfg.width = w;
    }
    if let Some(d) = p.depth {
        net_cfg.depth = d;
    }
    let net = match &p.checkpoint {
        Some(path) => Network::load(path, net_cfg)?.0,
        None => Network::init(net_cfg, &mut ChaCha8Rng::seed_from_u64(seed))?,
    };
    let problem = &cfg.pde;
    let (t0, t1) = problem.time_bounds();
    let bounds = problem.bounds();
    let lengths = problem.lengths();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = McSamples {
        times: vec![p.time.unwrap_or(0.5 * (t0 + t1))],
        space: vec![(0..p.samples).map(|_| bounds.iter().map(|&(a, b)| rng.random_range(a..b)).collect()).collect()],
        volumes: vec![lengths.iter().product()],
    };
    let modes = match lengths.len() {
        1 => positive_modes(p.modes, lengths[0]),
        _ => mode_box(p.modes, &lengths),
    };
    let omega = cfg.fourier.symbol.eval_all(&modes);
    let res = ntk_probe(&net, problem, &samples, &modes, &omega)?;

    let d = lengths.len();
    let xi: Vec<String> = (0..d).map(|i| format!("xi_{i}")).collect();
    let mut text = format!("index,{},weight_re,weight_im,eigenvalue,weighted_eigenvalue\n", xi.join(","));
    for (i, m) in modes.iter().enumerate() {
        let coords: Vec<String> = m.iter().map(|v| format!("{v:.9e}")).collect();
        text.push_str(&format!(
            "{i},{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            coords.join(","),
            omega[i].re,
            omega[i].im,
            res.unweighted.eigenvalues[i],
            res.weighted.eigenvalues[i]
        ));
    }
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("ntk.csv"), &text)?;
    println!(
        "{} modes, {} parameters; largest eigenvalue {:.4e} unweighted, {:.4e} weighted -> {}",
        modes.len(),
        net.param_count(),
        res.unweighted.eigenvalues[0],
        res.weighted.eigenvalues[0],
        dir.join("ntk.csv").display()
    );
    Ok(())
}

fn run_selftest(seed: u64) -> Result<()> {
    let checks = selftest::run_all(seed)?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed() { "ok  " } else { "FAIL" };
        println!("{tag} {:<28} worst {:.3e} (tol {:.0e})", c.name, c.worst, c.tol);
        failed += usize::from(!c.passed());
    }
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => 3,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => train(c),
        Command::SolveReference(c) => solve_reference(c),
        Command::AnalyzePsd { run, reference, out } => analyze_psd(run, reference.as_deref(), out.as_deref()),
        Command::NtkProbe {
            common,
            checkpoint,
            width,
            depth,
            modes,
            samples,
            time,
        } => probe(
            common,
            &Probe {
                checkpoint: checkpoint.clone(),
                width: *width,
                depth: *depth,
                modes: *modes,
                samples: *samples,
                time: *time,
            },
        ),
        Command::Selftest { seed } => run_selftest(*seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
