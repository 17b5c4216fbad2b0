use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

/// Smooth scalar nonlinearities usable inside jets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sin,
    Cos,
    /// `x^2`, a polynomial surrogate whose jets have simple closed forms.
    Square,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Sin => z.sin(),
            Activation::Cos => z.cos(),
            Activation::Square => z * z,
            Activation::Identity => z,
        }
    }

    /// `s[k][e]` = k-th derivative at `z[e]`, for `k = 0..=upto`.
    pub fn derivatives(self, z: &[f64], upto: usize) -> Vec<Vec<f64>> {
        match self {
            Activation::Sin | Activation::Cos => {
                let phase = if self == Activation::Cos { FRAC_PI_2 } else { 0.0 };
                let (s, c): (Vec<f64>, Vec<f64>) = z.iter().map(|&v| (v + phase).sin_cos()).unzip();
                // sin(z + k pi/2) cycles through sin, cos, -sin, -cos
                (0..=upto)
                    .map(|k| match k % 4 {
                        0 => s.clone(),
                        1 => c.clone(),
                        2 => s.iter().map(|v| -v).collect(),
                        _ => c.iter().map(|v| -v).collect(),
                    })
                    .collect()
            }
            Activation::Tanh => {
                let polys = tanh_polynomials(upto);
                let t: Vec<f64> = z.iter().map(|&v| tanh(v)).collect();
                polys
                    .iter()
                    .map(|p| t.iter().map(|&tv| horner(p, tv)).collect())
                    .collect()
            }
            Activation::Square => (0..=upto)
                .map(|k| match k {
                    0 => z.iter().map(|v| v * v).collect(),
                    1 => z.iter().map(|v| 2.0 * v).collect(),
                    2 => vec![2.0; z.len()],
                    _ => vec![0.0; z.len()],
                })
                .collect(),
            Activation::Identity => (0..=upto)
                .map(|k| match k {
                    0 => z.to_vec(),
                    1 => vec![1.0; z.len()],
                    _ => vec![0.0; z.len()],
                })
                .collect(),
        }
    }
}

/// tanh through `exp`, which is several times cheaper than the libm routine.
/// A Taylor series covers small arguments, where `exp(2x) - 1` cancels.
pub(crate) fn tanh(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.02 {
        let x2 = x * x;
        return x * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 + x2 * (-17.0 / 315.0 + x2 * 62.0 / 2835.0))));
    }
    if a > 20.0 {
        return x.signum();
    }
    let e = (2.0 * a).exp();
    ((e - 1.0) / (e + 1.0)).copysign(x)
}

/// Coefficients (ascending powers of `t = tanh z`) of the k-th derivative of
/// tanh, from `p_{k+1}(t) = p_k'(t) (1 - t^2)`.
fn tanh_polynomials(upto: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0, 1.0]];
    for _ in 0..upto {
        let p = out.last().unwrap();
        let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (i, &c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= c;
        }
        out.push(next);
    }
    out
}

fn horner(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}
