use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Tensor;
use crate::spectral::{fftfreq, mode_box, McProjection};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Direct O(n^2) DFT, `sum_j f_j e^{-2 pi i jk/n}`.
fn naive_dft(f: &[f64]) -> Vec<Complex64> {
    let n = f.len();
    (0..n)
        .map(|k| {
            f.iter()
                .enumerate()
                .map(|(j, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn mesh(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| a + (b - a) * j as f64 / n as f64).collect()
}

fn col(tape: &mut Tape, v: &[f64]) -> Var {
    tape.constant(Tensor::matrix(v.len(), 1, v.to_vec()))
}

fn zeros(n: usize) -> Vec<Complex64> {
    vec![c(0.0, 0.0); n]
}

/// Band-limited manufactured field and its derivatives at fixed `t`.
struct Field1 {
    u: Vec<f64>,
    ut: Vec<f64>,
    ux: Vec<f64>,
    uxx: Vec<f64>,
    uxxx: Vec<f64>,
}

/// `u = (1 + t) sin(w x) + 0.5 e^{-t} cos(2 w x + 0.3)` with `w = 2 pi / L`.
fn manufactured(xs: &[f64], length: f64, t: f64) -> Field1 {
    let w = 2.0 * PI / length;
    let (a, at) = (1.0 + t, 1.0);
    let (b, bt) = (0.5 * (-t).exp(), -0.5 * (-t).exp());
    let mut f = Field1 {
        u: vec![],
        ut: vec![],
        ux: vec![],
        uxx: vec![],
        uxxx: vec![],
    };
    for &x in xs {
        let (s1, c1) = (w * x).sin_cos();
        let (s2, c2) = (2.0 * w * x + 0.3).sin_cos();
        f.u.push(a * s1 + b * c2);
        f.ut.push(at * s1 + bt * c2);
        f.ux.push(a * w * c1 - 2.0 * w * b * s2);
        f.uxx.push(-a * w * w * s1 - 4.0 * w * w * b * c2);
        f.uxxx.push(-a * w.powi(3) * c1 + 8.0 * w.powi(3) * b * s2);
    }
    f
}

fn scalar_derivs(tape: &mut Tape, f: &Field1) -> Derivs {
    let mut d = Derivs::new();
    d.insert(0, &[], col(tape, &f.u));
    d.insert(0, &[1], col(tape, &f.ut));
    d.insert(0, &[0], col(tape, &f.ux));
    d.insert(0, &[0, 0], col(tape, &f.uxx));
    d.insert(0, &[0, 0, 0], col(tape, &f.uxxx));
    d
}

#[test]
fn constant_field_has_zero_burgers_residual() {
    let mut tape = Tape::new();
    let f = Field1 {
        u: vec![2.5; 8],
        ut: vec![0.0; 8],
        ux: vec![0.0; 8],
        uxx: vec![0.0; 8],
        uxxx: vec![0.0; 8],
    };
    let d = scalar_derivs(&mut tape, &f);
    let p = PdeProblem::Burgers(Burgers::default());
    let r = p.physical_residuals(&mut tape, &d).unwrap();
    assert!(tape.value(r[0]).data().iter().all(|&v| v == 0.0));

    let n = 16;
    let u_hat = naive_dft(&vec![2.5; n]);
    let u2_hat = naive_dft(&vec![6.25; n]);
    let xi = fftfreq(n, 2.0);
    let rh = burgers_spectral_residual(&u_hat, &zeros(n), &u2_hat, &xi, 0.3);
    assert!(rh.iter().all(|z| z.norm() < 1e-12 * 6.25 * n as f64));
}

#[test]
fn allen_cahn_residual_of_u_equals_t() {
    let ts = [0.0, 0.2, 0.5, 0.9];
    let mut tape = Tape::new();
    let f = Field1 {
        u: ts.to_vec(),
        ut: vec![1.0; 4],
        ux: vec![0.0; 4],
        uxx: vec![0.0; 4],
        uxxx: vec![0.0; 4],
    };
    let d = scalar_derivs(&mut tape, &f);
    let r = PdeProblem::AllenCahn(AllenCahn::default()).physical_residuals(&mut tape, &d).unwrap();
    for (t, got) in ts.iter().zip(tape.value(r[0]).data()) {
        assert!((got - (1.0 + 5.0 * t * t * t - 5.0 * t)).abs() < 1e-14);
    }
}

#[test]
fn initial_conditions() {
    let ac = AllenCahn::default();
    assert!((ac.initial(1.0) + 1.0).abs() < 1e-15);
    let kdv = Kdv::default();
    assert!((kdv.initial(0.0) + 1.0).abs() < 1e-15);
    assert!((Burgers::default().initial(0.5) + 1.0).abs() < 1e-15);
}

#[test]
fn burgers_advection_of_sine() {
    // u = sin(2 pi x) on [-1, 1): sin^2 = (1 - cos 4 pi x) / 2 lives on xi in {0, +-2}.
    let n = 32;
    let xs = mesh(-1.0, 1.0, n);
    let u: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x).sin()).collect();
    let u2: Vec<f64> = u.iter().map(|v| v * v).collect();
    let xi = fftfreq(n, 2.0);
    let r = burgers_spectral_residual(&naive_dft(&u), &zeros(n), &naive_dft(&u2), &xi, 0.0);
    for (k, z) in r.iter().enumerate() {
        let on = [0.0, 2.0, -2.0].iter().any(|&m| (xi[k] - m).abs() < 1e-12);
        if !on {
            assert!(z.norm() < 1e-10, "mode {} = {z}", xi[k]);
        }
    }
    // bin 4 is xi = 2; DFT(sin^2) there is -n/4.
    assert!((r[4] - c(0.0, -PI * n as f64 / 2.0)).norm() < 1e-10);
}

#[test]
fn burgers_viscous_term() {
    let n = 16;
    let nu = 0.07;
    let xs = mesh(-1.0, 1.0, n);
    let u: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x).cos()).collect();
    let xi = fftfreq(n, 2.0);
    let r = burgers_spectral_residual(&naive_dft(&u), &zeros(n), &zeros(n), &xi, nu);
    assert!((xi[2] - 1.0).abs() < 1e-15);
    let expect = 4.0 * PI * PI * nu * n as f64 / 2.0;
    assert!((r[2] - c(expect, 0.0)).norm() < 1e-10);
}

#[test]
fn allen_cahn_spectral_cases() {
    let n = 32;
    let xi = fftfreq(n, 2.0);
    let ones = vec![1.0; n];
    let r = allen_cahn_spectral_residual(&naive_dft(&ones), &zeros(n), &naive_dft(&ones), &xi, 1e-4, 5.0);
    assert!(r.iter().all(|z| z.norm() < 1e-12));

    let xs = mesh(-1.0, 1.0, n);
    let u: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x).sin()).collect();
    let u3: Vec<f64> = u.iter().map(|v| v.powi(3)).collect();
    // isolate the cubic term: zero diffusion and evaluate at xi = 3 where u^ = 0
    let r = allen_cahn_spectral_residual(&naive_dft(&u), &zeros(n), &naive_dft(&u3), &xi, 0.0, 5.0);
    assert!((xi[6] - 3.0).abs() < 1e-15);
    // sin^3 = (3 sin th - sin 3 th) / 4, DFT(sin 3 th) at its bin is -i n / 2
    assert!((r[6] - c(0.0, 5.0 * n as f64 / 8.0)).norm() < 1e-10);
    let zero = allen_cahn_spectral_residual(&zeros(n), &zeros(n), &zeros(n), &xi, 1e-4, 5.0);
    assert!(zero.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn kdv_spectral_cases() {
    let n = 32;
    let xi = fftfreq(n, 2.0);
    let r = kdv_spectral_residual(&naive_dft(&vec![0.7; n]), &zeros(n), &zeros(n), &xi, 0.0025);
    assert!(r.iter().all(|z| z.norm() < 1e-12 * 0.7 * n as f64));

    let d2 = 0.0025;
    let xs = mesh(0.0, 2.0, n);
    let u: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x).sin()).collect();
    let r = kdv_spectral_residual(&naive_dft(&u), &zeros(n), &zeros(n), &xi, d2);
    let expect = -4.0 * PI.powi(3) * d2 * n as f64;
    assert!((r[2] - c(expect, 0.0)).norm() < 1e-10);
}

#[test]
fn kdv_product_and_conservative_forms_agree() {
    let n = 64;
    let length = 2.0;
    let xs = mesh(0.0, length, n);
    let f = manufactured(&xs, length, 0.4);
    let uux: Vec<f64> = f.u.iter().zip(&f.ux).map(|(a, b)| a * b).collect();
    let u2: Vec<f64> = f.u.iter().map(|v| v * v).collect();
    let xi = fftfreq(n, length);
    let direct = naive_dft(&uux);
    let via_square: Vec<Complex64> = naive_dft(&u2).iter().zip(&xi).map(|(z, &k)| c(0.0, PI * k) * z).collect();
    let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (a, b) in direct.iter().zip(&via_square) {
        assert!((a - b).norm() <= 1e-8 * scale);
    }
}

#[test]
fn linear_terms_are_additive() {
    let n = 16;
    let xi = fftfreq(n, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    };
    let (u1, u2, v1, v2) = (rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng));
    let z = zeros(n);
    let pdes: Vec<Box<dyn ScalarPde>> = vec![Box::new(Burgers::default()), Box::new(AllenCahn::default()), Box::new(Kdv::default())];
    for p in &pdes {
        let sum_u: Vec<Complex64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let sum_v: Vec<Complex64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
        let both = spectral_residual(p.as_ref(), &sum_u, &sum_v, &z, &xi);
        let a = spectral_residual(p.as_ref(), &u1, &v1, &z, &xi);
        let b = spectral_residual(p.as_ref(), &u2, &v2, &z, &xi);
        for k in 0..n {
            assert!((both[k] - a[k] - b[k]).norm() < 1e-12);
        }
    }
}

#[test]
fn physical_and_spectral_residuals_agree_1d() {
    let problems = [
        PdeProblem::Burgers(Burgers { nu: 0.05 }),
        PdeProblem::AllenCahn(AllenCahn { alpha: 0.01, reaction: 5.0 }),
        PdeProblem::Kdv(Kdv {
            delta2: 0.0025,
            amplitude: 1.0,
        }),
    ];
    let n = 32;
    for p in &problems {
        let s = p.scalar().unwrap();
        let (a, b) = s.bounds();
        let xs = mesh(a, b, n);
        let f = manufactured(&xs, b - a, 0.3);
        let mut tape = Tape::new();
        let d = scalar_derivs(&mut tape, &f);
        let r = p.physical_residuals(&mut tape, &d).unwrap()[0];
        let phys_hat = naive_dft(tape.value(r).data());

        let nl = s.nonlinear_values(&f.u, &f.ux);
        let xi = fftfreq(n, b - a);
        let spec = spectral_residual(s, &naive_dft(&f.u), &naive_dft(&f.ut), &naive_dft(&nl), &xi);
        let scale = phys_hat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (k, (x, y)) in phys_hat.iter().zip(&spec).enumerate() {
            assert!((x - y).norm() <= 1e-6 * scale, "{} mode {}: {x} vs {y}", p.name(), xi[k]);
        }
    }
}

/// `psi = (1 + t) sin(x/2) cos(y) + 0.3 cos(x + y/2 + 0.2)` and its
/// derivatives on an `n x n` mesh of the periodic box.
struct NsField {
    pts: Vec<Vec<f64>>,
    psi: Vec<f64>,
    psi_t: Vec<f64>,
    comps: Vec<(usize, Vec<usize>, Vec<f64>)>,
}

fn ns_field(n: usize, t: f64) -> NsField {
    let xs = mesh(-2.0 * PI, 2.0 * PI, n);
    let mut out = NsField {
        pts: vec![],
        psi: vec![],
        psi_t: vec![],
        comps: vec![],
    };
    let names: Vec<(usize, Vec<usize>)> = vec![
        (0, vec![0]),
        (0, vec![1]),
        (0, vec![0, 0]),
        (0, vec![1, 1]),
        (1, vec![]),
        (1, vec![2]),
        (1, vec![0]),
        (1, vec![1]),
        (1, vec![0, 0]),
        (1, vec![1, 1]),
    ];
    let mut vals: Vec<Vec<f64>> = vec![vec![]; names.len()];
    let a = 1.0 + t;
    for &y in &xs {
        for &x in &xs {
            out.pts.push(vec![x, y]);
            let (s1, c1) = (0.5 * x).sin_cos();
            let (s2, c2) = y.sin_cos();
            let ph = x + 0.5 * y + 0.2;
            let (s3, c3) = ph.sin_cos();
            let f = s1 * c2;
            let psi = a * f + 0.3 * c3;
            let px = a * 0.5 * c1 * c2 - 0.3 * s3;
            let py = -a * s1 * s2 - 0.15 * s3;
            let pxx = -a * 0.25 * f - 0.3 * c3;
            let pyy = -a * f - 0.075 * c3;
            // omega = -lap psi
            let lam1 = 1.25;
            let lam3 = 1.25;
            let w = a * lam1 * f + 0.3 * lam3 * c3;
            let wt = lam1 * f;
            let wx = a * lam1 * 0.5 * c1 * c2 - 0.3 * lam3 * s3;
            let wy = -a * lam1 * s1 * s2 - 0.15 * lam3 * s3;
            let wxx = -a * lam1 * 0.25 * f - 0.3 * lam3 * c3;
            let wyy = -a * lam1 * f - 0.075 * lam3 * c3;
            out.psi.push(psi);
            out.psi_t.push(f);
            for (slot, v) in vals.iter_mut().zip([px, py, pxx, pyy, w, wt, wx, wy, wxx, wyy]) {
                slot.push(v);
            }
        }
    }
    out.comps = names.into_iter().zip(vals).map(|((o, c), v)| (o, c, v)).collect();
    out
}

/// `(|Omega|/N) sum_j f_j e^{-2 pi i <xi, x_j>}` by direct summation.
fn direct_projection(f: &[f64], pts: &[Vec<f64>], xi: &[f64], volume: f64) -> Complex64 {
    let s: Complex64 = f
        .iter()
        .zip(pts)
        .map(|(&v, x)| v * Complex64::from_polar(1.0, -2.0 * PI * (xi[0] * x[0] + xi[1] * x[1])))
        .sum();
    s * volume / f.len() as f64
}

#[test]
fn physical_and_spectral_residuals_agree_ns() {
    let n = 16;
    let ns = NavierStokes {
        nu: 0.05,
        ..NavierStokes::default()
    };
    let field = ns_field(n, 0.7);
    let mut tape = Tape::new();
    let mut d = Derivs::new();
    for (o, c, v) in &field.comps {
        let var = col(&mut tape, v);
        d.insert(*o, c, var);
    }
    let res = ns.residuals(&mut tape, &d).unwrap();
    let compat = tape.value(res[1]).data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(compat < 1e-12);
    let phys = tape.value(res[0]).data().to_vec();

    let l = 4.0 * PI;
    let modes = mode_box(4, &[l, l]);
    let proj = McProjection::shared(modes.clone(), &field.pts, l * l).unwrap();
    let psi = tape.constant(Tensor::matrix(1, n * n, field.psi.clone()));
    let psi_t = tape.constant(Tensor::matrix(1, n * n, field.psi_t.clone()));
    let r = ns_mc_residual(&mut tape, psi, psi_t, &proj, ns.nu).unwrap();
    let (re, im) = (tape.value(r.re).data().to_vec(), tape.value(r.im).data().to_vec());
    let expect: Vec<Complex64> = modes.iter().map(|xi| direct_projection(&phys, &field.pts, xi, l * l)).collect();
    let scale = expect.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(scale > 1.0);
    for k in 0..modes.len() {
        assert!((c(re[k], im[k]) - expect[k]).norm() <= 1e-6 * scale, "mode {:?}", modes[k]);
    }
}

#[test]
fn ns_single_mode_has_no_self_advection() {
    let n = 64;
    let l = 4.0 * PI;
    let xs = mesh(-2.0 * PI, 2.0 * PI, n);
    let mut pts = vec![];
    let mut psi = vec![];
    for &y in &xs {
        for &x in &xs {
            pts.push(vec![x, y]);
            psi.push((1.5 * x + 0.5 * y).cos());
        }
    }
    let modes = mode_box(4, &[l, l]);
    let proj = McProjection::shared(modes.clone(), &pts, l * l).unwrap();
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::matrix(1, n * n, psi.clone()));
    let pt = tape.constant(Tensor::zeros(&[1, n * n]));
    let r = ns_mc_residual(&mut tape, p, pt, &proj, 0.0).unwrap();
    let m = tape.value(r.re).data().iter().chain(tape.value(r.im).data()).fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(m <= 1e-6, "{m}");

    // viscous term alone: R^ = nu |k|^2 omega^ = nu |k|^4 psi^
    let nu = 0.3;
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::matrix(1, n * n, psi.clone()));
    let pt = tape.constant(Tensor::zeros(&[1, n * n]));
    let r = ns_mc_residual(&mut tape, p, pt, &proj, nu).unwrap();
    for (k, xi) in modes.iter().enumerate() {
        let k2 = 4.0 * PI * PI * (xi[0] * xi[0] + xi[1] * xi[1]);
        let psi_hat = direct_projection(&psi, &pts, xi, l * l);
        let got = c(tape.value(r.re).data()[k], tape.value(r.im).data()[k]);
        assert!((got - psi_hat * nu * k2 * k2).norm() < 1e-8);
    }
}

#[test]
fn ns_initial_spectrum_properties() {
    let n = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = ns_initial_spectrum(&mut rng, n, 4.0);
    assert_eq!(spec[0], c(0.0, 0.0));
    let xi = ns_wavenumbers(n);
    let mut nonzero = 0;
    for iy in 0..n {
        for ix in 0..n {
            let kappa = 2.0 * PI * xi[ix].hypot(xi[iy]);
            let z = spec[iy * n + ix];
            if kappa > 4.0 {
                assert_eq!(z, c(0.0, 0.0));
            } else if z.norm() > 0.0 {
                nonzero += 1;
            }
        }
    }
    assert!(nonzero > 20);

    // inverse transform by direct summation is real
    let xs: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let mut max_im = 0.0f64;
    for &fy in &xs[..4] {
        for &fx in &xs {
            let mut s = c(0.0, 0.0);
            for iy in 0..n {
                for ix in 0..n {
                    let ph = 2.0 * PI * (ix as f64 * fx + iy as f64 * fy);
                    s += spec[iy * n + ix] * Complex64::from_polar(1.0, ph);
                }
            }
            max_im = max_im.max(s.im.abs());
        }
    }
    assert!(max_im <= 1e-12, "{max_im}");

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = ns_initial_condition(&mut rng, n, 4.0, 1.0).unwrap();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let rms = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
    assert!(mean.abs() < 1e-12);
    assert!((rms - 1.0).abs() < 1e-12);
}

#[test]
fn problem_metadata() {
    let p = PdeProblem::by_name("kdv").unwrap();
    assert_eq!(p.bounds(), vec![(0.0, 2.0)]);
    assert_eq!(p.jet_spec().max_spatial_order, 3);
    let ns = PdeProblem::by_name("navier_stokes").unwrap();
    assert_eq!(ns.outputs(), 2);
    assert_eq!(ns.time_bounds(), (0.5, 1.5));
    assert!(ns.jet_spec().plan().unwrap().index_of(&[0, 1]).is_some());
    assert!(PdeProblem::by_name("heat").is_err());

    let json = serde_json::to_string(&PdeProblem::AllenCahn(AllenCahn::default())).unwrap();
    let back: PdeProblem = serde_json::from_str(&json).unwrap();
    assert_eq!(back, PdeProblem::AllenCahn(AllenCahn::default()));

    let tri = DomainShape::Triangle;
    assert!(tri.contains((-1.0, 1.0), (0.0, 1.0), 0.49, 1.0));
    assert!(!tri.contains((-1.0, 1.0), (0.0, 1.0), 0.51, 1.0));
}
