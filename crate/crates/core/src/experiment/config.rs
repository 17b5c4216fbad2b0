use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::jetnet::{EmbeddingConfig, JetOrderSpec, NetworkConfig};
use crate::losses::{LossWeights, QuantileSpec};
use crate::pdezoo::{AllenCahn, DomainShape, PdeProblem};
use crate::refsolve::{Integrator, SolveConfig};
use crate::spectral::{Normalization, SizeRange, SpectralSymbol};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FourierPath {
    #[default]
    Grid,
    Mc,
    Off,
}

impl FourierPath {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "mc" => Ok(Self::Mc),
            "off" => Ok(Self::Off),
            _ => Err(Error::Config(format!("unknown fourier path `{s}` (grid, mc or off)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierConfig {
    pub path: FourierPath,
    pub symbol: SpectralSymbol,
    /// Largest retained integer wavenumber `|k|`, with `xi = k / L`.
    pub max_mode: Option<usize>,
    pub normalization: Normalization,
    /// Mesh-size range per spatial dimension, redrawn every step (grid path).
    pub grid_size: Vec<SizeRange>,
    /// Time slices of the grid mesh, or of the sampled set (mc path).
    pub time_slices: usize,
    /// Spatial samples per slice (mc path).
    pub mc_points: usize,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            path: FourierPath::Grid,
            symbol: SpectralSymbol::polynomial(&[1.0, 0.0, 1.0]).expect("valid symbol"),
            max_mode: Some(12),
            normalization: Normalization::Linf,
            grid_size: Vec::new(),
            time_slices: 8,
            mc_points: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Fresh uniform points every step.
    #[default]
    Uniform,
    /// Spatial coordinates drawn once, times redrawn every step.
    FixedSpace,
    /// Points drawn once.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub collocation: usize,
    pub initial: usize,
    pub boundary: usize,
    pub mode: SamplingMode,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            collocation: 75,
            initial: 64,
            boundary: 64,
            mode: SamplingMode::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub every: usize,
    /// Points per spatial dimension; 256 in 1-D and 64 for Navier-Stokes
    /// when unset.
    pub space_points: Option<usize>,
    /// 101 in 1-D and 11 for Navier-Stokes when unset.
    pub time_samples: Option<usize>,
    /// Loss rows are written every `log_every` steps and at every evaluation.
    pub log_every: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            every: 250,
            space_points: None,
            time_samples: None,
            log_every: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Saved solution (`.json` sidecar) to evaluate against instead of solving.
    pub path: Option<PathBuf>,
    pub resolution: Option<usize>,
    pub dt: Option<f64>,
    pub integrator: Integrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pde: PdeProblem,
    pub domain: DomainShape,
    pub network: NetworkConfig,
    pub loss: LossWeights,
    pub quantile: QuantileSpec,
    pub fourier: FourierConfig,
    pub sampling: SamplingConfig,
    pub optimizer: AdamConfig,
    /// Optimizer steps ("epochs" and "iterations" alike).
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub eval: EvalConfig,
    pub reference: ReferenceConfig,
    /// Checkpoint cadence in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pde: PdeProblem::AllenCahn(AllenCahn::default()),
            domain: DomainShape::Square,
            network: NetworkConfig {
                embedding: EmbeddingConfig::Fourier {
                    sigma: 1.0,
                    features: 64,
                },
                ..NetworkConfig::default()
            },
            loss: LossWeights::default(),
            quantile: QuantileSpec::default(),
            fourier: FourierConfig::default(),
            sampling: SamplingConfig::default(),
            optimizer: AdamConfig::default(),
            iterations: 20_000,
            seeds: vec![0],
            eval: EvalConfig::default(),
            reference: ReferenceConfig::default(),
            checkpoint_every: 0,
            output: PathBuf::from("runs/default"),
        }
    }
}

/// Everything a run consumes, with every default made explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub physics_jet: JetOrderSpec,
    pub fourier_jet: JetOrderSpec,
    pub reference_solver: SolveConfig,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML config, or the `config` section of a `config.resolved.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let r: ResolvedConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            Ok(r.config)
        } else {
            Self::from_toml(&text)
        }
    }

    /// Fills problem-dependent defaults and checks for contradictions.
    pub fn resolve(mut self) -> Result<ResolvedConfig> {
        let mut warnings = Vec::new();
        let dims = self.pde.spatial_dims();
        self.network.input_dim = self.pde.input_dim();
        self.network.output_dim = self.pde.outputs();
        self.network.validate()?;
        self.loss.validate()?;
        self.quantile.validate()?;
        self.fourier.symbol.validate()?;
        warnings.extend(self.quantile.advisory());

        if self.fourier.grid_size.is_empty() {
            let r = match self.pde {
                PdeProblem::NavierStokes(_) => SizeRange::fixed(32),
                _ => SizeRange { min: 32, max: 48 },
            };
            self.fourier.grid_size = vec![r; dims];
        }
        if self.fourier.grid_size.len() != dims || self.fourier.grid_size.iter().any(|r| r.min < 2 || r.min > r.max) {
            return Err(Error::Config(format!(
                "fourier.grid_size needs {dims} nonempty range(s) with min >= 2"
            )));
        }
        if self.fourier.time_slices == 0 || self.fourier.mc_points == 0 {
            return Err(Error::Config("fourier.time_slices and fourier.mc_points must be positive".into()));
        }
        if self.fourier.max_mode == Some(0) {
            return Err(Error::Config("fourier.max_mode must be at least 1".into()));
        }
        let needs_modes = self.fourier.path == FourierPath::Mc || matches!(self.pde, PdeProblem::NavierStokes(_));
        if needs_modes && self.fourier.path != FourierPath::Off && self.fourier.max_mode.is_none() {
            return Err(Error::Config("fourier.max_mode is required for the mc path and for navier_stokes".into()));
        }
        if self.domain == DomainShape::Triangle {
            if dims != 1 {
                return Err(Error::Config("the triangular domain is 1-D only".into()));
            }
            if self.fourier.path == FourierPath::Grid && self.loss.fourier > 0.0 {
                return Err(Error::Config("fourier path `grid` requires a square domain; use `mc`".into()));
            }
        }
        if self.sampling.collocation == 0 || self.sampling.initial == 0 {
            return Err(Error::Config("sampling needs collocation and initial points".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let ns = matches!(self.pde, PdeProblem::NavierStokes(_));
        let space_points = *self.eval.space_points.get_or_insert(if ns { 64 } else { 256 });
        let time_samples = *self.eval.time_samples.get_or_insert(if ns { 11 } else { 101 });
        if self.eval.every == 0 || self.eval.log_every == 0 || space_points < 2 || time_samples < 2 {
            return Err(Error::Config("eval cadence must be positive and the eval mesh at least 2x2".into()));
        }

        let base = SolveConfig::for_problem(&self.pde);
        let resolution = self.reference.resolution.unwrap_or(base.resolution.max(space_points));
        let dt = self.reference.dt.unwrap_or(base.dt);
        self.reference.resolution = Some(resolution);
        self.reference.dt = Some(dt);
        let reference_solver = SolveConfig {
            resolution,
            dt,
            integrator: self.reference.integrator,
            samples: time_samples,
            eval_points: space_points,
        };
        if resolution % space_points != 0 {
            return Err(Error::Config(format!(
                "eval.space_points {space_points} must divide the reference resolution {resolution}"
            )));
        }
        Ok(ResolvedConfig {
            physics_jet: self.pde.jet_spec(),
            fourier_jet: self.pde.fourier_jet_spec(),
            reference_solver,
            warnings,
            config: self,
        })
    }
}
