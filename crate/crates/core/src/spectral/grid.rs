use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Signed DFT bin integers in standard order: `0, 1, .., -2, -1`.
pub fn fft_bins(n: usize) -> Vec<i64> {
    let n_i = n as i64;
    (0..n_i).map(|k| if k < (n_i + 1) / 2 { k } else { k - n_i }).collect()
}

/// Wavenumbers `k / length` for a length-`n` transform over a period `length`.
pub fn fftfreq(n: usize, length: f64) -> Vec<f64> {
    fft_bins(n).into_iter().map(|k| k as f64 / length).collect()
}

/// Per-dimension wavenumbers of a uniform periodic mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct WavenumberGrid {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    xi: Vec<Vec<f64>>,
}

impl WavenumberGrid {
    pub fn new(sizes: &[usize], lengths: &[f64]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() != lengths.len() {
            return Err(Error::InvalidArgument("grid sizes and lengths must match and be nonempty".into()));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidArgument(format!("transform length {n} < 2")));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument("domain lengths must be positive".into()));
        }
        let xi = sizes.iter().zip(lengths).map(|(&n, &l)| fftfreq(n, l)).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            lengths: lengths.to_vec(),
            xi,
        })
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn axis(&self, d: usize) -> &[f64] {
        &self.xi[d]
    }

    /// Every mesh wavenumber as a vector, in row-major bin order (last
    /// dimension fastest).
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for axis in &self.xi {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for &x in axis {
                    let mut v = prefix.clone();
                    v.push(x);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }
}

/// Inclusive integer range for randomized mesh sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: usize,
    pub max: usize,
}

impl SizeRange {
    pub fn fixed(n: usize) -> Self {
        Self { min: n, max: n }
    }
}

/// Draws one mesh size per dimension, uniformly from each inclusive range.
pub fn sample_grid_size<R: Rng + ?Sized>(ranges: &[SizeRange], rng: &mut R) -> Result<Vec<usize>> {
    ranges
        .iter()
        .map(|r| {
            if r.min > r.max {
                Err(Error::InvalidArgument(format!("empty mesh-size range {}..={}", r.min, r.max)))
            } else {
                Ok(rng.random_range(r.min..=r.max))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bins_follow_numpy_order() {
        assert_eq!(fft_bins(4), vec![0, 1, -2, -1]);
        assert_eq!(fft_bins(5), vec![0, 1, 2, -2, -1]);
        assert_eq!(fftfreq(4, 2.0), vec![0.0, 0.5, -1.0, -0.5]);
    }

    #[test]
    fn grid_vectors_row_major() {
        let g = WavenumberGrid::new(&[2, 3], &[1.0, 1.0]).unwrap();
        let v = g.vectors();
        assert_eq!(v.len(), 6);
        assert_eq!(v[1], vec![0.0, 1.0]);
        assert_eq!(v[3], vec![-1.0, 0.0]);
        assert!(WavenumberGrid::new(&[1], &[1.0]).is_err());
    }

    #[test]
    fn size_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(sample_grid_size(&[SizeRange::fixed(8)], &mut rng).unwrap(), vec![8]);
        }
        assert!(sample_grid_size(&[SizeRange { min: 5, max: 4 }], &mut rng).is_err());

        let r = SizeRange { min: 151, max: 301 };
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sample_grid_size(&[r], &mut rng).unwrap()[0] as f64)
            .collect();
        assert!(draws.iter().all(|&d| (151.0..=301.0).contains(&d)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        // discrete uniform on 151 values: var = (151^2 - 1) / 12
        let sd_mean = ((151.0f64 * 151.0 - 1.0) / 12.0).sqrt() / 100.0;
        assert!((mean - 226.0).abs() < 3.0 * sd_mean, "mean {mean}");

        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(sample_grid_size(&[r], &mut a).unwrap(), sample_grid_size(&[r], &mut b).unwrap());
        }
    }
}
