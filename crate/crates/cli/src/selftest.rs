use std::f64::consts::PI;
use std::sync::Arc;

use fourier_pinn::autodiff::{LinearOperator, Tape};
use fourier_pinn::jetnet::{JetOrderSpec, Network, NetworkConfig};
use fourier_pinn::spectral::{Dft2Operator, DftOperator, FftPlan};
use fourier_pinn::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

fn naive_dft(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let mut out = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        for j in 0..n {
            let a = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
            let (s, c) = a.sin_cos();
            out.0[k] += re[j] * c - im[j] * s;
            out.1[k] += re[j] * s + im[j] * c;
        }
    }
    out
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn fft(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for n in [4, 97, 151, 256, 301, 1024] {
        let (re, im) = (random_vec(rng, n), random_vec(rng, n));
        let (er, ei) = naive_dft(&re, &im);
        let (mut fr, mut fi) = (re.clone(), im.clone());
        FftPlan::new(n).forward(&mut fr, &mut fi);
        for k in 0..n {
            worst = worst.max((fr[k] - er[k]).abs()).max((fi[k] - ei[k]).abs());
        }
    }
    Check {
        name: "fft vs direct sum".into(),
        worst,
        tol: 1e-10,
    }
}

pub fn parseval(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = 16 + 7 * i;
        let f = random_vec(rng, n);
        let (mut re, mut im) = (f.clone(), vec![0.0; n]);
        FftPlan::new(n).forward(&mut re, &mut im);
        let e: f64 = f.iter().map(|v| v * v).sum();
        let s: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>() / n as f64;
        worst = worst.max((e - s).abs() / e);
    }
    Check {
        name: "parseval".into(),
        worst,
        tol: 1e-10,
    }
}

/// Fourth-order central stencils for derivatives of order 1 to 3.
fn stencil(order: usize) -> (&'static [(f64, f64)], f64) {
    match order {
        1 => (&[(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)], 12.0),
        2 => (&[(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)], 12.0),
        _ => (&[(-3.0, 1.0), (-2.0, -8.0), (-1.0, 13.0), (1.0, -13.0), (2.0, 8.0), (3.0, -1.0)], 8.0),
    }
}

/// Finite-difference estimate of the mixed derivative `component`.
fn finite_difference(net: &Network, point: &[f64], component: &[usize], h: f64) -> Result<Vec<f64>> {
    let d = point.len();
    let mut counts = vec![0usize; d];
    for &v in component {
        counts[v] += 1;
    }
    // tensor product of one-dimensional stencils
    let mut terms: Vec<(Vec<f64>, f64)> = vec![(point.to_vec(), 1.0)];
    for (v, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (taps, denom) = stencil(c);
        let scale = 1.0 / (denom * h.powi(c as i32));
        terms = terms
            .iter()
            .flat_map(|(p, w)| {
                taps.iter().map(move |&(s, a)| {
                    let mut q = p.clone();
                    q[v] += s * h;
                    (q, w * a * scale)
                })
            })
            .collect();
    }
    let flat: Vec<f64> = terms.iter().flat_map(|(p, _)| p.clone()).collect();
    let y = net.predict(&flat)?;
    let outs = net.config().output_dim;
    let mut acc = vec![0.0; outs];
    for (i, (_, w)) in terms.iter().enumerate() {
        for o in 0..outs {
            acc[o] += w * y.data()[i * outs + o];
        }
    }
    Ok(acc)
}

/// Jets of width-64 networks against finite differences at random points.
pub fn jets(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, spec) in [("jet 1-D", JetOrderSpec::one_d(3)), ("jet 2-D", JetOrderSpec::two_d(2, true))] {
        let d = spec.input_dim();
        let cfg = NetworkConfig {
            input_dim: d,
            output_dim: 1,
            depth: 2,
            width: 64,
            ..NetworkConfig::default()
        };
        let net = Network::init(cfg, rng)?;
        let plan = Arc::new(spec.plan()?);
        let points: Vec<f64> = (0..20 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tape = Tape::new();
        let vars = net.bind(&mut tape);
        let jet = net.forward_jet(&mut tape, &vars, &points, &plan)?;
        let mut worst = [0.0f64; 2];
        let mut third = false;
        for c in plan.components().iter().filter(|c| !c.is_empty()) {
            let v = jet.component(&mut tape, c)?;
            let got = tape.value(v).data().to_vec();
            let h = if c.len() == 3 { 1e-2 } else { 2e-3 };
            let mut expect = Vec::with_capacity(got.len());
            for p in points.chunks(d) {
                expect.extend(finite_difference(&net, p, c, h)?);
            }
            let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            let err = got.iter().zip(&expect).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            let slot = usize::from(c.len() == 3);
            third |= c.len() == 3;
            worst[slot] = worst[slot].max(err);
        }
        out.push(Check {
            name: format!("{name} orders <= 2"),
            worst: worst[0],
            tol: 1e-4,
        });
        if third {
            out.push(Check {
                name: format!("{name} order 3"),
                worst: worst[1],
                tol: 1e-3,
            });
        }
    }
    Ok(out)
}

/// `<A x, y> = <x, A^H y>` for the transform operators.
pub fn adjoint(rng: &mut ChaCha8Rng) -> Result<Check> {
    let ops: Vec<Box<dyn LinearOperator>> = vec![
        Box::new(DftOperator::full(37)?),
        Box::new(DftOperator::new(48, 1.0 / 48.0, vec![0, 1, 2, 5, 46, 47])?),
        Box::new(Dft2Operator::new(6, 10)?),
    ];
    let rows = 3;
    let mut worst = 0.0f64;
    for op in &ops {
        let (n, m) = (op.in_len(), op.out_len());
        let (xr, xi) = (random_vec(rng, rows * n), random_vec(rng, rows * n));
        let (yr, yi) = (random_vec(rng, rows * m), random_vec(rng, rows * m));
        let (mut ar, mut ai) = (vec![0.0; rows * m], vec![0.0; rows * m]);
        op.apply(rows, &xr, Some(&xi), &mut ar, &mut ai);
        let (mut br, mut bi) = (vec![0.0; rows * n], vec![0.0; rows * n]);
        op.apply_adjoint(rows, &yr, &yi, &mut br, &mut bi);
        // <u, v> = sum conj(u) v
        let dot = |ur: &[f64], ui: &[f64], vr: &[f64], vi: &[f64]| {
            ur.iter().zip(ui).zip(vr.iter().zip(vi)).fold((0.0, 0.0), |(sr, si), ((a, b), (c, d))| {
                (sr + a * c + b * d, si + a * d - b * c)
            })
        };
        let lhs = dot(&ar, &ai, &yr, &yi);
        let rhs = dot(&xr, &xi, &br, &bi);
        let scale = lhs.0.hypot(lhs.1).max(1e-12);
        worst = worst.max((lhs.0 - rhs.0).hypot(lhs.1 - rhs.1) / scale);
    }
    Ok(Check {
        name: "transform adjoints".into(),
        worst,
        tol: 1e-12,
    })
}

pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![fft(&mut rng), parseval(&mut rng)];
    out.extend(jets(&mut rng)?);
    out.push(adjoint(&mut rng)?);
    Ok(out)
}
