use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{Tape, Tensor};

fn plan(spec: &JetOrderSpec) -> Arc<JetPlan> {
    Arc::new(spec.plan().unwrap())
}

fn jet_values(net: &Network, points: &[f64], plan: &Arc<JetPlan>) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = net.bind(&mut tape);
    let jet = net.forward_jet(&mut tape, &vars, points, plan).unwrap();
    let comps = plan.components().to_vec();
    comps
        .iter()
        .map(|c| {
            let v = jet.component(&mut tape, c).unwrap();
            tape.value(v).data().to_vec()
        })
        .collect()
}

/// Nested 4th-order central differences of `f` along the multiset `c`.
fn fd(f: &dyn Fn(&[f64]) -> f64, p: &[f64], c: &[usize], h: f64) -> f64 {
    let Some(&v) = c.first() else { return f(p) };
    let k = c.iter().filter(|&&u| u == v).count();
    let rest: Vec<usize> = c.iter().copied().filter(|&u| u != v).collect();
    let (offs, w): (&[f64], &[f64]) = match k {
        1 => (&[-2.0, -1.0, 1.0, 2.0], &[1.0, -8.0, 8.0, -1.0]),
        2 => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[-1.0, 16.0, -30.0, 16.0, -1.0]),
        3 => (&[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0], &[1.0, -8.0, 13.0, -13.0, 8.0, -1.0]),
        _ => panic!("order {k} not covered"),
    };
    let denom = match k {
        1 => 12.0 * h,
        2 => 12.0 * h * h,
        _ => 8.0 * h * h * h,
    };
    let mut s = 0.0;
    for (o, wi) in offs.iter().zip(w) {
        let mut q = p.to_vec();
        q[v] += o * h;
        s += wi * fd(f, &q, &rest, h);
    }
    s / denom
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn check_against_fd(net: &Network, spec: &JetOrderSpec, points: &[f64], h: f64) -> Vec<(Vec<usize>, f64)> {
    let p = plan(spec);
    let jets = jet_values(net, points, &p);
    let d = net.config().input_dim;
    let f = |q: &[f64]| net.predict(q).unwrap().data()[0];
    p.components()
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for (r, q) in points.chunks(d).enumerate() {
                let expect = fd(&f, q, c, h);
                num = num.max((jets[ci][r] - expect).abs());
                den = den.max(expect.abs());
            }
            (c.clone(), num / den.max(1e-12))
        })
        .collect()
}

#[test]
fn single_linear_layer() {
    let cfg = NetworkConfig { depth: 0, activation: Activation::Identity, ..Default::default() };
    let net = Network::from_parts(cfg, None, vec![Tensor::matrix(2, 1, vec![3.0, 0.0]), Tensor::zeros(&[1])]).unwrap();
    let p = plan(&JetOrderSpec::one_d(3));
    let j = jet_values(&net, &[0.4, 0.1, -0.2, 0.9], &p);
    let ix = |c: &[usize]| p.index_of(c).unwrap();
    assert_eq!(j[0], vec![1.2000000000000002, -0.6000000000000001]);
    assert_eq!(j[ix(&[0])], vec![3.0, 3.0]);
    assert_eq!(j[ix(&[0, 0])], vec![0.0, 0.0]);
    assert_eq!(j[ix(&[0, 0, 0])], vec![0.0, 0.0]);
}

#[test]
fn sin_unit_third_derivative() {
    let cfg = NetworkConfig { depth: 1, width: 1, activation: Activation::Sin, ..Default::default() };
    let params = vec![
        Tensor::matrix(2, 1, vec![1.0, 0.0]),
        Tensor::zeros(&[1]),
        Tensor::matrix(1, 1, vec![1.0]),
        Tensor::zeros(&[1]),
    ];
    let net = Network::from_parts(cfg, None, params).unwrap();
    let p = plan(&JetOrderSpec::one_d(3));
    let j = jet_values(&net, &[0.0, 0.5, 0.7, 0.5], &p);
    let xxx = p.index_of(&[0, 0, 0]).unwrap();
    assert_eq!(j[xxx][0], -1.0);
    assert!((j[xxx][1] + 0.7f64.cos()).abs() < 1e-15);
}

#[test]
fn square_surrogate_closed_form() {
    // u = a (w x + v t + b)^2 + c
    let (w, v, b, a, c) = (0.7, -1.3, 0.2, 1.5, -0.4);
    let cfg = NetworkConfig { depth: 1, width: 1, activation: Activation::Square, ..Default::default() };
    let params = vec![
        Tensor::matrix(2, 1, vec![w, v]),
        Tensor::vector(vec![b]),
        Tensor::matrix(1, 1, vec![a]),
        Tensor::vector(vec![c]),
    ];
    let net = Network::from_parts(cfg, None, params).unwrap();
    let p = plan(&JetOrderSpec::one_d(3).with_extra(vec![0, 1]));
    let (x, t) = (0.3, -0.8);
    let j = jet_values(&net, &[x, t], &p);
    let z = w * x + v * t + b;
    let get = |cc: &[usize]| j[p.index_of(cc).unwrap()][0];
    let close = |u: f64, e: f64| (u - e).abs() < 1e-14;
    assert!(close(get(&[]), a * z * z + c));
    assert!(close(get(&[1]), 2.0 * a * v * z));
    assert!(close(get(&[0]), 2.0 * a * w * z));
    assert!(close(get(&[0, 0]), 2.0 * a * w * w));
    assert!(close(get(&[0, 1]), 2.0 * a * w * v));
    assert_eq!(get(&[0, 0, 0]), 0.0);
}

#[test]
fn affine_network_has_zero_higher_jets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = NetworkConfig { depth: 2, width: 8, activation: Activation::Identity, ..Default::default() };
    let net = Network::init(cfg, &mut rng).unwrap();
    let p = plan(&JetOrderSpec::one_d(3).with_extra(vec![0, 1]));
    let pts = random_points(&mut rng, 10, 2);
    let j = jet_values(&net, &pts, &p);
    for (ci, c) in p.components().iter().enumerate() {
        if c.len() >= 2 {
            assert!(j[ci].iter().all(|&v| v == 0.0), "component {c:?}");
        }
    }
}

#[test]
fn tanh_plain_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = NetworkConfig { depth: 3, width: 16, ..Default::default() };
    let net = Network::init(cfg, &mut rng).unwrap();
    let pts = random_points(&mut rng, 12, 2);
    for (c, err) in check_against_fd(&net, &JetOrderSpec::one_d(3).with_extra(vec![0, 1]), &pts, 1e-2) {
        let tol = if c.len() >= 3 { 1e-3 } else { 1e-4 };
        assert!(err < tol, "component {c:?}: {err}");
    }
}

#[test]
fn modified_with_fourier_features_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = NetworkConfig {
        depth: 2,
        width: 12,
        activation: Activation::Sin,
        architecture: Architecture::Modified,
        embedding: EmbeddingConfig::Fourier { sigma: 1.0, features: 4 },
        ..Default::default()
    };
    let net = Network::init(cfg, &mut rng).unwrap();
    let pts = random_points(&mut rng, 8, 2);
    for (c, err) in check_against_fd(&net, &JetOrderSpec::one_d(3), &pts, 2e-3) {
        let tol = if c.len() >= 3 { 1e-3 } else { 1e-4 };
        assert!(err < tol, "component {c:?}: {err}");
    }
}

#[test]
fn two_dimensional_jets_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = NetworkConfig { input_dim: 3, output_dim: 1, depth: 2, width: 10, ..Default::default() };
    let net = Network::init(cfg, &mut rng).unwrap();
    let pts = random_points(&mut rng, 8, 3);
    for (c, err) in check_against_fd(&net, &JetOrderSpec::two_d(2, true), &pts, 1e-3) {
        assert!(err < 1e-4, "component {c:?}: {err}");
    }
}

#[test]
fn order_consistency_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = NetworkConfig { depth: 3, width: 16, architecture: Architecture::Modified, ..Default::default() };
    let net = Network::init(cfg, &mut rng).unwrap();
    let pts = random_points(&mut rng, 9, 2);
    let p2 = plan(&JetOrderSpec::one_d(2));
    let p3 = plan(&JetOrderSpec::one_d(3));
    let j2 = jet_values(&net, &pts, &p2);
    let j3 = jet_values(&net, &pts, &p3);
    for (ci, c) in p2.components().iter().enumerate() {
        assert_eq!(j2[ci], j3[p3.index_of(c).unwrap()], "component {c:?}");
    }
}

#[test]
fn jet_value_matches_predict() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for arch in [Architecture::Plain, Architecture::Modified] {
        let cfg = NetworkConfig {
            depth: 2,
            width: 8,
            output_dim: 2,
            architecture: arch,
            embedding: EmbeddingConfig::Fourier { sigma: 2.0, features: 3 },
            ..Default::default()
        };
        let net = Network::init(cfg, &mut rng).unwrap();
        let pts = random_points(&mut rng, 5, 2);
        let j = jet_values(&net, &pts, &plan(&JetOrderSpec::one_d(1)));
        let pred = net.predict(&pts).unwrap();
        for (a, b) in j[0].iter().zip(pred.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}

/// Independent value-only modified MLP on plain loops.
fn modified_reference(net: &Network, x: &[f64]) -> f64 {
    let p = net.params();
    let act = |z: f64| z.tanh();
    let layer = |h: &[f64], w: &Tensor, b: &Tensor| -> Vec<f64> {
        (0..w.cols())
            .map(|j| act((0..w.rows()).map(|i| h[i] * w.data()[i * w.cols() + j]).sum::<f64>() + b.data()[j]))
            .collect()
    };
    let e1 = layer(x, &p[0], &p[1]);
    let e2 = layer(x, &p[2], &p[3]);
    let mut h = x.to_vec();
    let depth = net.config().depth;
    for l in 0..depth {
        let g = layer(&h, &p[4 + 2 * l], &p[5 + 2 * l]);
        h = (0..g.len()).map(|j| (1.0 - g[j]) * e1[j] + g[j] * e2[j]).collect();
    }
    let (w, b) = (&p[4 + 2 * depth], &p[5 + 2 * depth]);
    (0..w.rows()).map(|i| h[i] * w.data()[i]).sum::<f64>() + b.data()[0]
}

#[test]
fn modified_matches_loop_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = NetworkConfig { depth: 3, width: 7, architecture: Architecture::Modified, ..Default::default() };
    let net = Network::init(cfg, &mut rng).unwrap();
    let pts = random_points(&mut rng, 6, 2);
    let j = jet_values(&net, &pts, &plan(&JetOrderSpec::value_only(1)));
    for (r, q) in pts.chunks(2).enumerate() {
        assert!((j[0][r] - modified_reference(&net, q)).abs() < 1e-12);
    }
}

#[test]
fn modified_gate_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pts = random_points(&mut rng, 4, 2);
    // Readout of an encoder alone: out.w . act(x U + b) + out.b
    let readout = |n: &Network, enc: usize| -> Vec<f64> {
        let p = n.params();
        let (w, b) = (&p[2 * enc], &p[2 * enc + 1]);
        let act = n.config().activation;
        pts.chunks(2)
            .map(|x| {
                (0..5)
                    .map(|j| act.apply(x[0] * w.data()[j] + x[1] * w.data()[5 + j] + b.data()[j]) * p[6].data()[j])
                    .sum::<f64>()
                    + p[7].data()[0]
            })
            .collect()
    };
    // zero gate pre-activation: tanh(0) = 0 keeps the first encoder,
    // cos(0) = 1 selects the second
    for (act, enc) in [(Activation::Tanh, 0), (Activation::Cos, 1)] {
        let cfg = NetworkConfig { depth: 1, width: 5, architecture: Architecture::Modified, activation: act, ..Default::default() };
        let mut net = Network::init(cfg, &mut rng).unwrap();
        net.params_mut()[4] = Tensor::zeros(&[2, 5]);
        let got = net.predict(&pts).unwrap();
        for (g, e) in got.data().iter().zip(readout(&net, enc)) {
            assert!((g - e).abs() < 1e-14);
        }
    }
    // equal encoders make the gate irrelevant
    let cfg = NetworkConfig { depth: 1, width: 5, architecture: Architecture::Modified, ..Default::default() };
    let mut net = Network::init(cfg, &mut rng).unwrap();
    net.params_mut()[2] = net.params()[0].clone();
    net.params_mut()[3] = net.params()[1].clone();
    let got = net.predict(&pts).unwrap();
    for (g, e) in got.data().iter().zip(readout(&net, 0)) {
        assert!((g - e).abs() < 1e-14);
    }
}

#[test]
fn parameter_gradients_of_jet_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = NetworkConfig { depth: 2, width: 6, architecture: Architecture::Modified, ..Default::default() };
    let net = Network::init(cfg, &mut rng).unwrap();
    let pts = random_points(&mut rng, 4, 2);
    let p = plan(&JetOrderSpec::one_d(3).with_extra(vec![0, 1]));
    let loss = |n: &Network, tape: &mut Tape| {
        let vars = n.bind(tape);
        let jet = n.forward_jet(tape, &vars, &pts, &p).unwrap();
        let mut acc = None;
        for (k, c) in p.components().to_vec().iter().enumerate() {
            let v = jet.component(tape, c).unwrap();
            let sq = tape.square(v);
            let s = tape.sum(sq);
            let s = tape.scale(s, 1.0 / (k + 1) as f64);
            acc = Some(match acc {
                None => s,
                Some(a) => tape.add(a, s).unwrap(),
            });
        }
        (vars, acc.unwrap())
    };
    let mut tape = Tape::new();
    let (vars, root) = loss(&net, &mut tape);
    let grads = tape.backward(root).unwrap();
    let h = 1e-6;
    for (pi, var) in vars.iter().enumerate() {
        let g = grads.get(*var).unwrap();
        for e in [0, g.len() / 2, g.len() - 1] {
            let mut plus = net.clone();
            plus.params_mut()[pi].data_mut()[e] += h;
            let mut minus = net.clone();
            minus.params_mut()[pi].data_mut()[e] -= h;
            let mut t1 = Tape::new();
            let lp = { let (_, r) = loss(&plus, &mut t1); t1.scalar(r) };
            let mut t2 = Tape::new();
            let lm = { let (_, r) = loss(&minus, &mut t2); t2.scalar(r) };
            let fdv = (lp - lm) / (2.0 * h);
            let an = g.data()[e];
            assert!((an - fdv).abs() <= 1e-4 * an.abs().max(1e-3), "param {pi}[{e}]: {an} vs {fdv}");
        }
    }
}
