use std::fmt::Debug;
use std::sync::Arc;

/// A complex linear map `A: C^in -> C^out` applied independently to every row
/// of a batch, with its conjugate-transpose available for the backward pass.
///
/// Buffers are row-major `[rows, len]`. A missing imaginary input means the
/// input is real.
pub trait LinearOperator: Debug + Send + Sync {
    fn in_len(&self) -> usize;
    fn out_len(&self) -> usize;

    /// Number of rows the operator requires, if it is row-specific.
    fn fixed_rows(&self) -> Option<usize> {
        None
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]);

    /// `A^H` applied to each row.
    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]);
}

/// Identity on `C^n`.
#[derive(Debug, Clone)]
pub struct IdentityOperator {
    pub n: usize,
}

impl LinearOperator for IdentityOperator {
    fn in_len(&self) -> usize {
        self.n
    }

    fn out_len(&self) -> usize {
        self.n
    }

    fn apply(&self, _rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        out_re.copy_from_slice(re);
        match im {
            Some(im) => out_im.copy_from_slice(im),
            None => out_im.fill(0.0),
        }
    }

    fn apply_adjoint(&self, _rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        out_re.copy_from_slice(re);
        out_im.copy_from_slice(im);
    }
}

/// `A^H` of a wrapped operator.
#[derive(Debug, Clone)]
pub struct AdjointOf(pub Arc<dyn LinearOperator>);

impl LinearOperator for AdjointOf {
    fn in_len(&self) -> usize {
        self.0.out_len()
    }

    fn out_len(&self) -> usize {
        self.0.in_len()
    }

    fn fixed_rows(&self) -> Option<usize> {
        self.0.fixed_rows()
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        match im {
            Some(im) => self.0.apply_adjoint(rows, re, im, out_re, out_im),
            None => {
                let zeros = vec![0.0; re.len()];
                self.0.apply_adjoint(rows, re, &zeros, out_re, out_im);
            }
        }
    }

    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        self.0.apply(rows, re, Some(im), out_re, out_im);
    }
}

/// Dense complex matrix operator, mostly useful for tests and small probes.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    rows_out: usize,
    cols_in: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl DenseOperator {
    /// `re`, `im` are row-major `[out_len, in_len]`.
    pub fn new(out_len: usize, in_len: usize, re: Vec<f64>, im: Vec<f64>) -> Self {
        assert_eq!(re.len(), out_len * in_len);
        assert_eq!(im.len(), out_len * in_len);
        Self {
            rows_out: out_len,
            cols_in: in_len,
            re,
            im,
        }
    }
}

impl LinearOperator for DenseOperator {
    fn in_len(&self) -> usize {
        self.cols_in
    }

    fn out_len(&self) -> usize {
        self.rows_out
    }

    fn apply(&self, rows: usize, re: &[f64], im: Option<&[f64]>, out_re: &mut [f64], out_im: &mut [f64]) {
        let (m, n) = (self.rows_out, self.cols_in);
        for r in 0..rows {
            for i in 0..m {
                let (mut sr, mut si) = (0.0, 0.0);
                for j in 0..n {
                    let (ar, ai) = (self.re[i * n + j], self.im[i * n + j]);
                    let xr = re[r * n + j];
                    let xi = im.map_or(0.0, |v| v[r * n + j]);
                    sr += ar * xr - ai * xi;
                    si += ar * xi + ai * xr;
                }
                out_re[r * m + i] = sr;
                out_im[r * m + i] = si;
            }
        }
    }

    fn apply_adjoint(&self, rows: usize, re: &[f64], im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
        let (m, n) = (self.rows_out, self.cols_in);
        for r in 0..rows {
            for j in 0..n {
                let (mut sr, mut si) = (0.0, 0.0);
                for i in 0..m {
                    // conj(a) * y
                    let (ar, ai) = (self.re[i * n + j], -self.im[i * n + j]);
                    let (yr, yi) = (re[r * m + i], im[r * m + i]);
                    sr += ar * yr - ai * yi;
                    si += ar * yi + ai * yr;
                }
                out_re[r * n + j] = sr;
                out_im[r * n + j] = si;
            }
        }
    }
}

/// Checks `<Ax, y> = <x, A^H y>` on the given vectors, returning the absolute
/// discrepancy relative to `max(1, |<Ax, y>|)`.
pub fn adjoint_mismatch(op: &dyn LinearOperator, rows: usize, x: (&[f64], &[f64]), y: (&[f64], &[f64])) -> f64 {
    let (n, m) = (op.in_len(), op.out_len());
    let mut ax = (vec![0.0; rows * m], vec![0.0; rows * m]);
    op.apply(rows, x.0, Some(x.1), &mut ax.0, &mut ax.1);
    let mut ahy = (vec![0.0; rows * n], vec![0.0; rows * n]);
    op.apply_adjoint(rows, y.0, y.1, &mut ahy.0, &mut ahy.1);
    // <a, b> = sum a * conj(b)
    let inner = |a: &(Vec<f64>, Vec<f64>), b: (&[f64], &[f64])| {
        let mut s = (0.0, 0.0);
        for i in 0..a.0.len() {
            s.0 += a.0[i] * b.0[i] + a.1[i] * b.1[i];
            s.1 += a.1[i] * b.0[i] - a.0[i] * b.1[i];
        }
        s
    };
    let lhs = inner(&ax, y);
    let rhs = {
        let (r, i) = inner(&ahy, x);
        (r, -i)
    };
    let diff = ((lhs.0 - rhs.0).powi(2) + (lhs.1 - rhs.1).powi(2)).sqrt();
    diff / (lhs.0.hypot(lhs.1)).max(1.0)
}
