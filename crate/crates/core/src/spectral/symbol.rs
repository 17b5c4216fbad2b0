use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// `(2 pi i xi)^r` for integer `r`; in several dimensions the sum of
    /// `prod_i (2 pi i xi_i)^{alpha_i}` over multi-indices with `|alpha| = r`.
    #[default]
    SignedPower,
    /// `|2 pi xi|^r`, any real `r >= 0`.
    RadialPower,
    /// `(1 + |xi|^2)^{r/2}`.
    Sobolev,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolTerm {
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub order: f64,
    #[serde(default)]
    pub kind: SymbolKind,
}

fn one() -> f64 {
    1.0
}

impl SymbolTerm {
    pub fn new(coef: Complex64, order: f64, kind: SymbolKind) -> Self {
        Self {
            re: coef.re,
            im: coef.im,
            order,
            kind,
        }
    }

    pub fn coef(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A pseudo-differential symbol `P(xi) = sum_j a_j p_j(xi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralSymbol {
    terms: Vec<SymbolTerm>,
}

impl SpectralSymbol {
    pub fn new(terms: Vec<SymbolTerm>) -> Result<Self> {
        let s = Self { terms };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidArgument("symbol needs at least one term".into()));
        }
        for t in &self.terms {
            if !(t.order >= 0.0) || !t.order.is_finite() {
                return Err(Error::InvalidArgument(format!("symbol order {} must be >= 0", t.order)));
            }
            if t.kind == SymbolKind::SignedPower && t.order.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "fractional order {} needs the radial kind",
                    t.order
                )));
            }
        }
        Ok(())
    }

    /// `sum_r c_r (2 pi i xi)^r` with real coefficients, `coefs[r]` for order r.
    pub fn polynomial(coefs: &[f64]) -> Result<Self> {
        Self::new(
            coefs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(r, &c)| SymbolTerm::new(Complex64::new(c, 0.0), r as f64, SymbolKind::SignedPower))
                .collect(),
        )
    }

    /// `|2 pi xi|^s`, the symbol of `(-Laplacian)^{s/2}`.
    pub fn fractional(s: f64) -> Result<Self> {
        Self::new(vec![SymbolTerm::new(Complex64::new(1.0, 0.0), s, SymbolKind::RadialPower)])
    }

    pub fn sobolev(r: f64) -> Result<Self> {
        Self::new(vec![SymbolTerm::new(Complex64::new(1.0, 0.0), r, SymbolKind::Sobolev)])
    }

    pub fn terms(&self) -> &[SymbolTerm] {
        &self.terms
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| SymbolTerm {
                    re: t.re * c,
                    im: t.im * c,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        self.terms.iter().map(|t| t.coef() * eval_term(t, xi)).sum()
    }

    pub fn eval_all(&self, modes: &[Vec<f64>]) -> Vec<Complex64> {
        modes.iter().map(|xi| self.eval(xi)).collect()
    }
}

fn eval_term(t: &SymbolTerm, xi: &[f64]) -> Complex64 {
    let norm2: f64 = xi.iter().map(|x| x * x).sum();
    match t.kind {
        SymbolKind::RadialPower => {
            if t.order == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new((2.0 * PI * norm2.sqrt()).powf(t.order), 0.0)
            }
        }
        SymbolKind::Sobolev => Complex64::new((1.0 + norm2).powf(t.order / 2.0), 0.0),
        SymbolKind::SignedPower => {
            let z: Vec<Complex64> = xi.iter().map(|&x| Complex64::new(0.0, 2.0 * PI * x)).collect();
            homogeneous_sum(&z, t.order as usize)
        }
    }
}

/// Sum of all monomials of total degree `r` in `z`.
fn homogeneous_sum(z: &[Complex64], r: usize) -> Complex64 {
    // h_r(z_1..z_d) = sum_{j=0}^{r} z_1^j h_{r-j}(z_2..z_d)
    match z.split_first() {
        None => {
            if r == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        Some((first, rest)) => {
            if rest.is_empty() {
                return first.powu(r as u32);
            }
            (0..=r).map(|j| first.powu(j as u32) * homogeneous_sum(rest, r - j)).sum()
        }
    }
}
