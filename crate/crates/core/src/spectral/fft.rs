use std::f64::consts::PI;

/// Precomputed twiddles for length-`n` transforms.
///
/// Powers of two use an iterative radix-2 Cooley-Tukey; anything else falls
/// back to a direct O(n^2) sum over the same twiddle table.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "fft length must be positive");
        let (cos, sin) = (0..n)
            .map(|m| {
                let a = 2.0 * PI * m as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Self { n, cos, sin }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X_k = sum_j x_j e^{-2 pi i jk/n}`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, -1.0);
    }

    /// Unnormalized backward transform (conjugate kernel, no 1/n).
    pub fn backward(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, 1.0);
    }

    /// Inverse transform including the 1/n factor.
    pub fn inverse(&self, re: &mut [f64], im: &mut [f64]) {
        self.backward(re, im);
        let s = 1.0 / self.n as f64;
        re.iter_mut().chain(im.iter_mut()).for_each(|v| *v *= s);
    }

    fn run(&self, re: &mut [f64], im: &mut [f64], sign: f64) {
        assert_eq!(re.len(), self.n);
        assert_eq!(im.len(), self.n);
        if self.n.is_power_of_two() {
            self.radix2(re, im, sign);
        } else {
            self.direct(re, im, sign);
        }
    }

    fn radix2(&self, re: &mut [f64], im: &mut [f64], sign: f64) {
        let n = self.n;
        if n == 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * stride], sign * self.sin[k * stride]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len *= 2;
        }
    }

    fn direct(&self, re: &mut [f64], im: &mut [f64], sign: f64) {
        let n = self.n;
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            let mut m = 0;
            for j in 0..n {
                let (c, s) = (self.cos[m], sign * self.sin[m]);
                sr += re[j] * c - im[j] * s;
                si += re[j] * s + im[j] * c;
                m += k;
                if m >= n {
                    m -= n;
                }
            }
            out_re[k] = sr;
            out_im[k] = si;
        }
        re.copy_from_slice(&out_re);
        im.copy_from_slice(&out_im);
    }
}

/// Forward transform of a real signal, returning `(re, im)`.
pub fn fft_real(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut re = x.to_vec();
    let mut im = vec![0.0; x.len()];
    FftPlan::new(x.len()).forward(&mut re, &mut im);
    (re, im)
}

/// 2-D transform of a row-major `[ny][nx]` field: rows first, then columns.
#[derive(Clone, Debug)]
pub struct Fft2Plan {
    ny: usize,
    nx: usize,
    row: FftPlan,
    col: FftPlan,
}

impl Fft2Plan {
    pub fn new(ny: usize, nx: usize) -> Self {
        Self {
            ny,
            nx,
            row: FftPlan::new(nx),
            col: FftPlan::new(ny),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, false);
    }

    pub fn backward(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, true);
    }

    pub fn inverse(&self, re: &mut [f64], im: &mut [f64]) {
        self.backward(re, im);
        let s = 1.0 / (self.nx * self.ny) as f64;
        re.iter_mut().chain(im.iter_mut()).for_each(|v| *v *= s);
    }

    fn run(&self, re: &mut [f64], im: &mut [f64], back: bool) {
        let (ny, nx) = (self.ny, self.nx);
        assert_eq!(re.len(), ny * nx);
        assert_eq!(im.len(), ny * nx);
        for r in 0..ny {
            let (a, b) = (&mut re[r * nx..(r + 1) * nx], &mut im[r * nx..(r + 1) * nx]);
            if back {
                self.row.backward(a, b);
            } else {
                self.row.forward(a, b);
            }
        }
        let mut cr = vec![0.0; ny];
        let mut ci = vec![0.0; ny];
        for c in 0..nx {
            for r in 0..ny {
                cr[r] = re[r * nx + c];
                ci[r] = im[r * nx + c];
            }
            if back {
                self.col.backward(&mut cr, &mut ci);
            } else {
                self.col.forward(&mut cr, &mut ci);
            }
            for r in 0..ny {
                re[r * nx + c] = cr[r];
                im[r * nx + c] = ci[r];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut o = (vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            for j in 0..n {
                let a = -2.0 * PI * (j * k) as f64 / n as f64;
                o.0[k] += re[j] * a.cos() - im[j] * a.sin();
                o.1[k] += re[j] * a.sin() + im[j] * a.cos();
            }
        }
        o
    }

    #[test]
    fn delta_and_constant() {
        let (re, im) = fft_real(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(re, vec![1.0; 4]);
        assert_eq!(im, vec![0.0; 4]);
        let (re, im) = fft_real(&[1.0; 4]);
        assert_eq!(re, vec![4.0, 0.0, 0.0, 0.0]);
        assert!(im.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn matches_direct_sum_small_sizes() {
        for n in [1, 2, 3, 5, 8, 12, 16] {
            let re: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).sin()).collect();
            let im: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
            let (er, ei) = naive(&re, &im);
            let (mut r, mut i) = (re.clone(), im.clone());
            FftPlan::new(n).forward(&mut r, &mut i);
            for k in 0..n {
                assert!((r[k] - er[k]).abs() < 1e-12 && (i[k] - ei[k]).abs() < 1e-12, "n={n} k={k}");
            }
            FftPlan::new(n).inverse(&mut r, &mut i);
            for k in 0..n {
                assert!((r[k] - re[k]).abs() < 1e-12 && (i[k] - im[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fft2_matches_separable_direct_sum() {
        let (ny, nx) = (4, 6);
        let re: Vec<f64> = (0..ny * nx).map(|i| (i as f64 * 0.77).sin()).collect();
        let im = vec![0.0; ny * nx];
        let (mut r, mut i) = (re.clone(), im.clone());
        Fft2Plan::new(ny, nx).forward(&mut r, &mut i);
        for ky in 0..ny {
            for kx in 0..nx {
                let (mut sr, mut si) = (0.0, 0.0);
                for y in 0..ny {
                    for x in 0..nx {
                        let a = -2.0 * PI * ((ky * y) as f64 / ny as f64 + (kx * x) as f64 / nx as f64);
                        sr += re[y * nx + x] * a.cos();
                        si += re[y * nx + x] * a.sin();
                    }
                }
                assert!((r[ky * nx + kx] - sr).abs() < 1e-11);
                assert!((i[ky * nx + kx] - si).abs() < 1e-11);
            }
        }
        Fft2Plan::new(ny, nx).inverse(&mut r, &mut i);
        for k in 0..ny * nx {
            assert!((r[k] - re[k]).abs() < 1e-12 && i[k].abs() < 1e-12);
        }
    }
}
