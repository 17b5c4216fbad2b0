use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::embedding::{identity_jet, FourierFeatureMap};
use super::layout::JetPlan;
use crate::autodiff::{gemm, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Plain,
    /// Gated network with two input encoders: `h <- e1 + g * (e2 - e1)`
    /// where `g = act(h W + b)`.
    Modified,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingConfig {
    #[default]
    None,
    Fourier {
        sigma: f64,
        features: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Hidden layers (gating layers for the modified architecture).
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub architecture: Architecture,
    pub embedding: EmbeddingConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 2,
            output_dim: 1,
            depth: 4,
            width: 128,
            activation: Activation::Tanh,
            architecture: Architecture::Plain,
            embedding: EmbeddingConfig::None,
        }
    }
}

impl NetworkConfig {
    fn feature_dim(&self) -> usize {
        match self.embedding {
            EmbeddingConfig::None => self.input_dim,
            EmbeddingConfig::Fourier { features, .. } => 2 * features,
        }
    }

    /// Parameter names and shapes in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let f = self.feature_dim();
        let w = self.width;
        let mut out = Vec::new();
        let mut prev = f;
        if self.architecture == Architecture::Modified {
            out.push(("enc_u.w".to_string(), vec![f, w]));
            out.push(("enc_u.b".to_string(), vec![w]));
            out.push(("enc_v.w".to_string(), vec![f, w]));
            out.push(("enc_v.b".to_string(), vec![w]));
        }
        for l in 0..self.depth {
            out.push((format!("hidden{l}.w"), vec![prev, w]));
            out.push((format!("hidden{l}.b"), vec![w]));
            prev = w;
        }
        out.push(("out.w".to_string(), vec![prev, self.output_dim]));
        out.push(("out.b".to_string(), vec![self.output_dim]));
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network input/output dimensions must be positive".into()));
        }
        if self.width == 0 && self.depth > 0 {
            return Err(Error::Config("network width must be positive".into()));
        }
        if let EmbeddingConfig::Fourier { sigma, features } = self.embedding {
            if features == 0 || !(sigma >= 0.0) {
                return Err(Error::Config("fourier embedding needs features > 0 and sigma >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Network function plus its output jets for a batch of points.
#[derive(Clone, Debug)]
pub struct Jet {
    pub stacked: Var,
    pub batch: usize,
    pub outputs: usize,
    pub plan: Arc<JetPlan>,
}

impl Jet {
    /// Component `c` (variable multiset) of every output: `[batch, outputs]`.
    pub fn component(&self, tape: &mut Tape, c: &[usize]) -> Result<Var> {
        let i = self
            .plan
            .index_of(c)
            .ok_or_else(|| Error::InvalidArgument(format!("jet component {c:?} not carried")))?;
        tape.slice_rows(self.stacked, i * self.batch, (i + 1) * self.batch)
    }

    /// Component `c` of output `o`: `[batch, 1]`.
    pub fn output(&self, tape: &mut Tape, o: usize, c: &[usize]) -> Result<Var> {
        let v = self.component(tape, c)?;
        if self.outputs == 1 {
            Ok(v)
        } else {
            tape.slice_cols(v, o, o + 1)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    config: NetworkConfig,
    embedding: Option<FourierFeatureMap>,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl Network {
    /// Glorot-uniform weights, zero biases, fresh embedding draw.
    pub fn init<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let embedding = match config.embedding {
            EmbeddingConfig::None => None,
            EmbeddingConfig::Fourier { sigma, features } => {
                Some(FourierFeatureMap::sample(features, config.input_dim, sigma, rng)?)
            }
        };
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape) in config.layout() {
            let t = if shape.len() == 2 {
                let a = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                let data = (0..shape[0] * shape[1]).map(|_| rng.random_range(-a..a)).collect();
                Tensor::matrix(shape[0], shape[1], data)
            } else {
                Tensor::zeros(&shape)
            };
            names.push(name);
            params.push(t);
        }
        Ok(Self {
            config,
            embedding,
            names,
            params,
        })
    }

    pub fn from_parts(config: NetworkConfig, embedding: Option<FourierFeatureMap>, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != params.len() {
            return Err(Error::Shape(format!("expected {} parameter tensors, got {}", layout.len(), params.len())));
        }
        for ((name, shape), p) in layout.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("{name}: expected {shape:?}, got {:?}", p.shape())));
            }
        }
        match (&config.embedding, &embedding) {
            (EmbeddingConfig::None, None) => {}
            (EmbeddingConfig::Fourier { features, .. }, Some(map))
                if map.features() == *features && map.input_dim() == config.input_dim => {}
            _ => return Err(Error::Shape("embedding does not match the network config".into())),
        }
        Ok(Self {
            names: layout.into_iter().map(|(n, _)| n).collect(),
            config,
            embedding,
            params,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn embedding(&self) -> Option<&FourierFeatureMap> {
        self.embedding.as_ref()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Places every parameter on the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    fn input_features(&self, points: &[f64], plan: &JetPlan) -> Result<Tensor> {
        if plan.nvars() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "jet plan has {} variables, network takes {}",
                plan.nvars(),
                self.config.input_dim
            )));
        }
        match &self.embedding {
            Some(map) => map.embed(points, plan),
            None => identity_jet(points, plan),
        }
    }

    fn activate(&self, tape: &mut Tape, z: Var, plan: &JetPlan, batch: usize) -> Result<Var> {
        let terms = plan.activation_terms().clone();
        let zt = tape.value(z);
        let head = &zt.data()[..batch * zt.cols()];
        let derivs = self.config.activation.derivatives(head, terms.max_order + 1);
        tape.jet_activation(z, terms, batch, derivs)
    }

    fn dense(&self, tape: &mut Tape, h: Var, w: Var, b: Var, batch: usize) -> Result<Var> {
        let z = tape.matmul(h, w)?;
        tape.add_bias_rows(z, b, 0, batch)
    }

    /// Output jets at `points` (row-major `[batch, input_dim]`).
    pub fn forward_jet(&self, tape: &mut Tape, vars: &[Var], points: &[f64], plan: &Arc<JetPlan>) -> Result<Jet> {
        if vars.len() != self.params.len() {
            return Err(Error::Shape("bound parameter count mismatch".into()));
        }
        let d = self.config.input_dim;
        if points.is_empty() || points.len() % d != 0 {
            return Err(Error::Shape(format!("points must be a nonempty [batch, {d}] array")));
        }
        let batch = points.len() / d;
        let x = tape.constant(self.input_features(points, plan)?);
        let mut p = vars.iter().copied();
        let mut next = || p.next().expect("layout checked");
        let mut h = x;
        match self.config.architecture {
            Architecture::Plain => {
                for _ in 0..self.config.depth {
                    let (w, b) = (next(), next());
                    let z = self.dense(tape, h, w, b, batch)?;
                    h = self.activate(tape, z, plan, batch)?;
                }
            }
            Architecture::Modified => {
                let (uw, ub, vw, vb) = (next(), next(), next(), next());
                let zu = self.dense(tape, x, uw, ub, batch)?;
                let e1 = self.activate(tape, zu, plan, batch)?;
                let zv = self.dense(tape, x, vw, vb, batch)?;
                let e2 = self.activate(tape, zv, plan, batch)?;
                let diff = tape.sub(e2, e1)?;
                for _ in 0..self.config.depth {
                    let (w, b) = (next(), next());
                    let z = self.dense(tape, h, w, b, batch)?;
                    let g = self.activate(tape, z, plan, batch)?;
                    let gd = tape.jet_mul(g, diff, plan.product_terms().clone())?;
                    h = tape.add(e1, gd)?;
                }
            }
        }
        let (w, b) = (next(), next());
        let y = self.dense(tape, h, w, b, batch)?;
        Ok(Jet {
            stacked: y,
            batch,
            outputs: self.config.output_dim,
            plan: plan.clone(),
        })
    }

    /// Plain function values `[batch, output_dim]` without a tape.
    pub fn predict(&self, points: &[f64]) -> Result<Tensor> {
        let d = self.config.input_dim;
        if points.len() % d != 0 {
            return Err(Error::Shape(format!("points must be [batch, {d}]")));
        }
        let batch = points.len() / d;
        let feats = match &self.embedding {
            Some(map) => {
                let plan = JetPlan::new(d, &[])?;
                map.embed(points, &plan)?
            }
            None => Tensor::matrix(batch, d, points.to_vec()),
        };
        let act = self.config.activation;
        let dense = |h: &[f64], w: &Tensor, b: &Tensor, apply: bool| {
            let (k, n) = (w.rows(), w.cols());
            let mut z = vec![0.0; batch * n];
            gemm(batch, k, n, h, w.data(), &mut z, false);
            for row in z.chunks_mut(n) {
                for (v, bb) in row.iter_mut().zip(b.data()) {
                    *v += bb;
                    if apply {
                        *v = act.apply(*v);
                    }
                }
            }
            z
        };
        let mut p = self.params.iter();
        let mut h = feats.into_data();
        match self.config.architecture {
            Architecture::Plain => {
                for _ in 0..self.config.depth {
                    let (w, b) = (p.next().unwrap(), p.next().unwrap());
                    h = dense(&h, w, b, true);
                }
            }
            Architecture::Modified => {
                let x = h.clone();
                let (uw, ub, vw, vb) = (p.next().unwrap(), p.next().unwrap(), p.next().unwrap(), p.next().unwrap());
                let e1 = dense(&x, uw, ub, true);
                let e2 = dense(&x, vw, vb, true);
                for _ in 0..self.config.depth {
                    let (w, b) = (p.next().unwrap(), p.next().unwrap());
                    let g = dense(&h, w, b, true);
                    h = g
                        .iter()
                        .zip(e1.iter().zip(&e2))
                        .map(|(g, (a, c))| a + g * (c - a))
                        .collect();
                }
            }
        }
        let (w, b) = (p.next().unwrap(), p.next().unwrap());
        let out = dense(&h, w, b, false);
        Ok(Tensor::matrix(batch, self.config.output_dim, out))
    }
}
