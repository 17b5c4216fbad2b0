use num_complex::Complex64;

use crate::spectral::{fft_bins, Fft2Plan, FftPlan};

/// Smallest padded length free of aliasing for products of `degree` fields
/// band-limited to `|k| < n/2`: at least `(degree + 1) n / 2`, rounded up to
/// a power of two when `n` is one.
pub fn padded_len(n: usize, degree: usize) -> usize {
    let m = ((degree + 1) * n).div_ceil(2).max(n);
    if n.is_power_of_two() {
        m.next_power_of_two()
    } else {
        m
    }
}

fn split(z: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
}

/// Destination of each coarse bin in the padded spectrum; the Nyquist bin of
/// an even length has no partner and is dropped.
fn bin_map(n: usize, m: usize) -> Vec<Option<usize>> {
    fft_bins(n)
        .into_iter()
        .map(|k| {
            if n % 2 == 0 && k == -(n as i64) / 2 {
                None
            } else if k >= 0 {
                Some(k as usize)
            } else {
                Some((m as i64 + k) as usize)
            }
        })
        .collect()
}

/// Zero-padded 1-D transforms between an `n`-bin spectrum and `m` points.
#[derive(Clone, Debug)]
pub struct Padded1 {
    n: usize,
    m: usize,
    coarse: FftPlan,
    fine: FftPlan,
    map: Vec<Option<usize>>,
}

impl Padded1 {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            coarse: FftPlan::new(n),
            fine: FftPlan::new(m),
            map: bin_map(n, m),
        }
    }

    pub fn fine_len(&self) -> usize {
        self.m
    }

    /// Physical values on the coarse mesh.
    pub fn to_physical(&self, hat: &[Complex64]) -> Vec<f64> {
        let (mut re, mut im) = split(hat);
        self.coarse.inverse(&mut re, &mut im);
        re
    }

    pub fn to_spectral(&self, u: &[f64]) -> Vec<Complex64> {
        let mut re = u.to_vec();
        let mut im = vec![0.0; u.len()];
        self.coarse.forward(&mut re, &mut im);
        re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
    }

    /// Trigonometric interpolant of the coarse spectrum on the `m` fine points.
    pub fn to_fine(&self, hat: &[Complex64]) -> Vec<f64> {
        let mut re = vec![0.0; self.m];
        let mut im = vec![0.0; self.m];
        for (z, d) in hat.iter().zip(&self.map) {
            if let Some(d) = *d {
                re[d] = z.re;
                im[d] = z.im;
            }
        }
        self.fine.backward(&mut re, &mut im);
        let s = 1.0 / self.n as f64;
        re.iter().map(|v| v * s).collect()
    }

    /// Coarse spectrum of a fine-mesh field, truncated to the `n` bins
    /// (Nyquist bin zeroed).
    pub fn from_fine(&self, f: &[f64]) -> Vec<Complex64> {
        let mut re = f.to_vec();
        let mut im = vec![0.0; self.m];
        self.fine.forward(&mut re, &mut im);
        let s = self.n as f64 / self.m as f64;
        self.map
            .iter()
            .map(|d| d.map_or(Complex64::new(0.0, 0.0), |d| Complex64::new(re[d], im[d]) * s))
            .collect()
    }
}

/// Square 2-D version on row-major `[ky][kx]` spectra.
#[derive(Clone, Debug)]
pub struct Padded2 {
    n: usize,
    m: usize,
    coarse: Fft2Plan,
    fine: Fft2Plan,
    map: Vec<Option<usize>>,
}

impl Padded2 {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            coarse: Fft2Plan::new(n, n),
            fine: Fft2Plan::new(m, m),
            map: bin_map(n, m),
        }
    }

    pub fn to_physical(&self, hat: &[Complex64]) -> Vec<f64> {
        let (mut re, mut im) = split(hat);
        self.coarse.inverse(&mut re, &mut im);
        re
    }

    pub fn to_spectral(&self, u: &[f64]) -> Vec<Complex64> {
        let mut re = u.to_vec();
        let mut im = vec![0.0; u.len()];
        self.coarse.forward(&mut re, &mut im);
        re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
    }

    pub fn to_fine(&self, hat: &[Complex64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut re = vec![0.0; m * m];
        let mut im = vec![0.0; m * m];
        for (iy, dy) in self.map.iter().enumerate() {
            let Some(dy) = *dy else { continue };
            for (ix, dx) in self.map.iter().enumerate() {
                if let Some(dx) = *dx {
                    let z = hat[iy * n + ix];
                    re[dy * m + dx] = z.re;
                    im[dy * m + dx] = z.im;
                }
            }
        }
        self.fine.backward(&mut re, &mut im);
        let s = 1.0 / (n * n) as f64;
        re.iter().map(|v| v * s).collect()
    }

    pub fn from_fine(&self, f: &[f64]) -> Vec<Complex64> {
        let (n, m) = (self.n, self.m);
        let mut re = f.to_vec();
        let mut im = vec![0.0; m * m];
        self.fine.forward(&mut re, &mut im);
        let s = (n * n) as f64 / (m * m) as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for (iy, dy) in self.map.iter().enumerate() {
            let Some(dy) = *dy else { continue };
            for (ix, dx) in self.map.iter().enumerate() {
                if let Some(dx) = *dx {
                    out[iy * n + ix] = Complex64::new(re[dy * m + dx], im[dy * m + dx]) * s;
                }
            }
        }
        out
    }
}
