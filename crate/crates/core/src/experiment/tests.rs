use std::fs;

use super::*;
use crate::jetnet::EmbeddingConfig;
use crate::losses::WeightMode;
use crate::pdezoo::{Burgers, Kdv, NavierStokes};
use crate::spectral::SizeRange;

fn tiny(pde: PdeProblem) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        pde,
        iterations: 20,
        ..ExperimentConfig::default()
    };
    c.network.depth = 2;
    c.network.width = 16;
    c.network.embedding = EmbeddingConfig::Fourier {
        sigma: 1.0,
        features: 8,
    };
    c.sampling.collocation = 16;
    c.sampling.initial = 8;
    c.sampling.boundary = 8;
    c.fourier.grid_size = vec![SizeRange { min: 16, max: 20 }];
    c.fourier.time_slices = 3;
    c.fourier.mc_points = 16;
    c.eval.every = 10;
    c.eval.log_every = 5;
    c.eval.space_points = Some(32);
    c.eval.time_samples = Some(11);
    c.reference.resolution = Some(64);
    c
}

fn resolved(c: ExperimentConfig) -> (ResolvedConfig, SolutionGrid) {
    let r = c.resolve().unwrap();
    let reference = load_reference(&r).unwrap();
    (r, reference)
}

#[test]
fn toml_config_parses_and_resolves() {
    let text = r#"
        iterations = 100
        seeds = [1, 2]
        domain = "square"

        [pde]
        name = "burgers"
        nu = 0.01

        [network]
        depth = 3
        width = 32
        activation = "sin"
        architecture = "modified"
        embedding = { kind = "fourier", sigma = 1.0, features = 16 }

        [loss]
        physics = 1.0
        boundary = 10.0
        fourier = 0.025
        mode = { kind = "grad_norm", alpha = 0.9, every = 100 }

        [quantile]
        tau = 0.9

        [fourier]
        path = "mc"
        max_mode = 8
        symbol = [{ order = 1 }, { order = 2 }]
        grid_size = [{ min = 151, max = 301 }]

        [sampling]
        collocation = 50
        mode = "fixed_space"

        [optimizer]
        lr = 1e-3
    "#;
    let c = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(c.pde, PdeProblem::Burgers(Burgers { nu: 0.01 }));
    assert_eq!(c.fourier.symbol.terms().len(), 2);
    assert_eq!(c.sampling.initial, 64);
    let r = c.resolve().unwrap();
    assert_eq!(r.config.network.input_dim, 2);
    assert_eq!(r.config.eval.space_points, Some(256));
    assert_eq!(r.config.eval.time_samples, Some(101));
    assert_eq!(r.config.eval.every, 250);
    assert_eq!(r.reference_solver.resolution, 1024);
    assert_eq!(r.physics_jet, PdeProblem::Burgers(Burgers::default()).jet_spec());
    assert!(r.warnings.is_empty());

    // every field is materialized in the resolved form
    let json = serde_json::to_value(&r).unwrap();
    for key in ["pde", "domain", "network", "loss", "quantile", "fourier", "sampling", "optimizer", "eval", "reference"] {
        assert!(json["config"].get(key).is_some(), "{key}");
    }
    assert!(json["config"]["reference"]["dt"].is_number());
    assert!(json["config"]["eval"]["space_points"].is_number());
}

#[test]
fn config_errors() {
    let bad = |t: &str| matches!(ExperimentConfig::from_toml(t), Err(Error::Config(_)));
    assert!(bad("unknown = 1"));
    assert!(bad("[pde]\nname = \"heat\""));
    assert!(bad("[fourier]\npath = \"fft\""));

    let mut c = ExperimentConfig::default();
    c.domain = DomainShape::Triangle;
    assert!(matches!(c.clone().resolve(), Err(Error::Config(m)) if m.contains("square")));
    c.fourier.path = FourierPath::Mc;
    assert!(c.clone().resolve().is_ok());
    c.fourier.max_mode = None;
    assert!(c.clone().resolve().is_err());

    let mut c = ExperimentConfig::default();
    c.loss.physics = 0.0;
    c.loss.boundary = 0.0;
    c.loss.fourier = 0.0;
    assert!(c.resolve().is_err());
    let mut c = ExperimentConfig::default();
    c.seeds.clear();
    assert!(c.resolve().is_err());
    let mut c = ExperimentConfig::default();
    c.eval.space_points = Some(100);
    assert!(c.resolve().is_err());
    let mut c = ExperimentConfig::default();
    c.quantile.tau = 0.5;
    assert_eq!(c.resolve().unwrap().warnings.len(), 1);
    assert_eq!(FourierPath::parse("mc").unwrap(), FourierPath::Mc);
}

#[test]
fn navier_stokes_defaults() {
    let c = ExperimentConfig {
        pde: PdeProblem::NavierStokes(NavierStokes::default()),
        ..ExperimentConfig::default()
    };
    let r = c.resolve().unwrap();
    assert_eq!(r.config.eval.space_points, Some(64));
    assert_eq!(r.config.eval.time_samples, Some(11));
    assert_eq!(r.config.network.output_dim, 2);
    assert_eq!(r.config.fourier.grid_size.len(), 2);
    assert_eq!(r.reference_solver.resolution, 128);
}

#[test]
fn zero_fourier_weight_is_vanilla() {
    let mut a = tiny(PdeProblem::Kdv(Kdv::default()));
    a.loss.fourier = 0.0;
    let mut b = a.clone();
    b.fourier.path = FourierPath::Off;
    b.loss.fourier = 0.05;
    let (ra, reference) = resolved(a);
    let rb = b.resolve().unwrap();
    let x = train(&ra, 3, &reference, None).unwrap();
    let y = train(&rb, 3, &reference, None).unwrap();
    assert_eq!(x.network.params(), y.network.params());
    for (p, q) in x.records.iter().zip(&y.records) {
        assert_eq!(p.report, q.report);
        assert_eq!(p.rel_l2, q.rel_l2);
    }
    assert_eq!(x.final_rel_l2, y.final_rel_l2);

    // an active Fourier term changes the trajectory
    let mut c = ra.config.clone();
    c.loss.fourier = 0.05;
    let z = train(&c.resolve().unwrap(), 3, &reference, None).unwrap();
    assert_ne!(z.network.params(), x.network.params());
    assert!(z.records.iter().all(|r| r.report.fourier > 0.0));
}

#[test]
fn zero_iterations_evaluates_initial_state() {
    let mut c = tiny(PdeProblem::Kdv(Kdv::default()));
    c.iterations = 0;
    let (r, reference) = resolved(c);
    let s = train(&r, 0, &reference, None).unwrap();
    assert_eq!(s.records.len(), 1);
    assert_eq!(s.records[0].iteration, 0);
    assert_eq!(s.records[0].rel_l2, Some(s.final_rel_l2));
    let fresh = Network::init(r.config.network.clone(), &mut rng(0, STREAM_INIT)).unwrap();
    assert_eq!(s.network.params(), fresh.params());
}

#[test]
fn outputs_are_deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(PdeProblem::Kdv(Kdv::default()));
    c.checkpoint_every = 10;
    let (r, reference) = resolved(c);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    train(&r, 7, &reference, Some(&a)).unwrap();
    train(&r, 7, &reference, Some(&b)).unwrap();
    let run_a = fs::read(a.join("run.csv")).unwrap();
    assert_eq!(run_a, fs::read(b.join("run.csv")).unwrap());
    for f in ["psd.csv", "stats.csv", "error_power.csv", "field.json", "field.bin", "field.csv", "timing.csv", "checkpoint.bin", "config.resolved.json"] {
        assert!(a.join(f).exists(), "{f}");
    }

    let text = String::from_utf8(run_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RUN_CSV_HEADER);
    let iters: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(iters, vec![0, 5, 10, 15, 20]);
    assert!(iters.windows(2).all(|w| w[0] < w[1]));
    let stats = fs::read_to_string(a.join("stats.csv")).unwrap();
    assert_eq!(
        stats.lines().next().unwrap().split(',').collect::<Vec<_>>(),
        [
            "Total log error power",
            "Average log error power",
            "Frequency 50",
            "Frequency 90",
            "Ratio 0.0-0.1",
            "Ratio 0.1-0.25",
            "Ratio 0.25-0.5"
        ]
    );

    // re-ingesting the resolved config reproduces the run
    let back = ExperimentConfig::from_path(&a.join("config.resolved.json")).unwrap();
    assert_eq!(back.seeds, vec![7]);
    let rr = back.resolve().unwrap();
    let c2 = dir.path().join("c");
    train(&rr, 7, &reference, Some(&c2)).unwrap();
    assert_eq!(fs::read(c2.join("run.csv")).unwrap(), fs::read(a.join("run.csv")).unwrap());

    let (net, header) = Network::load(&a.join("checkpoint.bin"), rr.config.network.clone()).unwrap();
    assert_eq!(header.step, 20);
    assert_eq!(header.seed, 7);
    assert_eq!(net.param_count(), rr.config.network.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum::<usize>());

    let d = dir.path().join("d");
    train(&r, 8, &reference, Some(&d)).unwrap();
    assert_ne!(fs::read(d.join("run.csv")).unwrap(), fs::read(a.join("run.csv")).unwrap());
}

#[test]
fn empty_streams_write_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    output::write_records(dir.path(), &[], &[]).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("run.csv")).unwrap(), format!("{RUN_CSV_HEADER}\n"));
    assert_eq!(fs::read_to_string(dir.path().join("timing.csv")).unwrap(), format!("{TIMING_CSV_HEADER}\n"));
}

#[test]
fn divergence_aborts_with_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(PdeProblem::Kdv(Kdv::default()));
    c.optimizer.lr = 1e300;
    let (r, reference) = resolved(c);
    match train(&r, 0, &reference, Some(dir.path())) {
        Err(Error::Numerical(m)) => assert!(m.contains("non-finite"), "{m}"),
        other => panic!("expected a numerical abort, got {:?}", other.map(|s| s.final_rel_l2)),
    }
    let (net, _) = Network::load(&dir.path().join("checkpoint.bin"), r.config.network.clone()).unwrap();
    assert!(net.params().iter().all(|p| p.data().iter().all(|v| v.is_finite())));
    assert!(fs::read_to_string(dir.path().join("run.csv")).unwrap().starts_with(RUN_CSV_HEADER));
}

#[test]
fn triangle_domain_with_sampled_fourier_term() {
    let mut c = tiny(PdeProblem::Burgers(Burgers::default()));
    c.domain = DomainShape::Triangle;
    c.fourier.path = FourierPath::Mc;
    c.fourier.max_mode = Some(4);
    c.sampling.mode = SamplingMode::FixedSpace;
    c.iterations = 10;
    let (r, reference) = resolved(c);
    let s = train(&r, 1, &reference, None).unwrap();
    assert!(s.final_rel_l2.is_finite());
    assert!(s.records.iter().all(|r| r.report.boundary > 0.0 && r.report.fourier > 0.0));

    // points outside the triangle do not count
    let mut pred = reference.clone();
    let mask = domain_mask(DomainShape::Triangle, &reference);
    assert!(mask.iter().any(|m| !m) && mask.iter().any(|&m| m));
    for (v, m) in pred.values[0].iter_mut().zip(&mask) {
        if !m {
            *v += 5.0;
        }
    }
    assert_eq!(evaluate(&pred, &reference, DomainShape::Triangle).unwrap().rel_l2, 0.0);
    assert!(evaluate(&pred, &reference, DomainShape::Square).unwrap().rel_l2 > 0.1);
}

#[test]
fn sampler_modes() {
    let p = PdeProblem::Burgers(Burgers::default());
    let mut r = rng(0, 1);
    let mut tri = Sampler::new(&p, DomainShape::Triangle, SamplingConfig::default());
    let pts = tri.collocation(&mut r);
    assert_eq!(pts.len(), 150);
    assert!(pts.chunks(2).all(|q| DomainShape::Triangle.contains((-1.0, 1.0), (0.0, 1.0), q[0], q[1])));

    let cfg = SamplingConfig {
        mode: SamplingMode::FixedSpace,
        ..SamplingConfig::default()
    };
    let mut s = Sampler::new(&p, DomainShape::Triangle, cfg);
    let (a, b) = (s.collocation(&mut r), s.collocation(&mut r));
    assert!(a.chunks(2).zip(b.chunks(2)).all(|(p, q)| p[0] == q[0]));
    assert_ne!(a, b);
    assert!(b.chunks(2).all(|q| DomainShape::Triangle.contains((-1.0, 1.0), (0.0, 1.0), q[0], q[1])));

    let cfg = SamplingConfig {
        mode: SamplingMode::Fixed,
        ..SamplingConfig::default()
    };
    let mut s = Sampler::new(&p, DomainShape::Square, cfg);
    assert_eq!(s.collocation(&mut r), s.collocation(&mut r));

    let mc = Sampler::new(&p, DomainShape::Triangle, SamplingConfig::default()).mc_samples(4, 10, &mut r);
    assert!(mc.times.windows(2).all(|w| w[0] <= w[1]));
    for ((t, set), v) in mc.times.iter().zip(&mc.space).zip(&mc.volumes) {
        let (a, b) = DomainShape::Triangle.slice((-1.0, 1.0), (0.0, 1.0), *t);
        assert!((v - (b - a)).abs() < 1e-15);
        assert!(set.iter().all(|x| (a..=b).contains(&x[0])));
    }
}

#[test]
fn grad_norm_tuning_moves_weights() {
    let mut c = tiny(PdeProblem::Kdv(Kdv::default()));
    c.loss.mode = WeightMode::GradNorm { alpha: 0.5, every: 5 };
    c.iterations = 10;
    let (r, reference) = resolved(c);
    let s = train(&r, 0, &reference, None).unwrap();
    let first = &s.records[0];
    assert!(first.report.grad_norms.is_some());
    let last = s.records.last().unwrap();
    assert_ne!(last.lambda, [1.0, 10.0, 0.05]);
    assert!(last.lambda.iter().all(|l| l.is_finite() && *l > 0.0));
}

#[test]
fn navier_stokes_short_run() {
    let mut c = tiny(PdeProblem::NavierStokes(NavierStokes::default()));
    c.fourier.grid_size = vec![SizeRange::fixed(8); 2];
    c.fourier.time_slices = 2;
    c.fourier.max_mode = Some(2);
    c.eval.space_points = Some(16);
    c.eval.time_samples = Some(3);
    c.reference.resolution = Some(32);
    c.reference.dt = Some(5e-3);
    c.iterations = 2;
    let (r, reference) = resolved(c);
    let s = train(&r, 0, &reference, None).unwrap();
    assert!(s.final_rel_l2.is_finite());
    assert!(s.records.iter().all(|r| r.report.compatibility > 0.0 && r.report.fourier > 0.0));
    assert_eq!(s.prediction.meta.fields, vec!["psi", "omega"]);
    assert_eq!(s.psd.power.len(), 12);

    let mut mc = r.config.clone();
    mc.fourier.path = FourierPath::Mc;
    mc.fourier.mc_points = 32;
    let s = train(&mc.resolve().unwrap(), 0, &reference, None).unwrap();
    assert!(s.records.iter().all(|r| r.report.fourier > 0.0));
}

#[test]
fn mismatched_reference_is_rejected() {
    let (r, _) = resolved(tiny(PdeProblem::Kdv(Kdv::default())));
    let (_, other) = resolved(tiny(PdeProblem::Burgers(Burgers::default())));
    assert!(matches!(train(&r, 0, &other, None), Err(Error::Config(_))));
}
