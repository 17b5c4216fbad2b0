use fourier_pinn::experiment::{load_reference, train, ExperimentConfig};
use fourier_pinn::pdezoo::{AllenCahn, PdeProblem};

#[test]
fn allen_cahn_training_reduces_error() {
    let mut c = ExperimentConfig {
        pde: PdeProblem::AllenCahn(AllenCahn::default()),
        iterations: 2000,
        ..ExperimentConfig::default()
    };
    c.network.width = 64;
    c.sampling.collocation = 75;
    c.eval.every = 2000;
    let r = c.resolve().unwrap();
    let reference = load_reference(&r).unwrap();
    let mut ratios: Vec<f64> = (0..5)
        .map(|seed| {
            let s = train(&r, seed, &reference, None).unwrap();
            let first = s.records[0].rel_l2.unwrap();
            s.final_rel_l2 / first
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    assert!(ratios[2] <= 0.8, "median error ratio {:?}", ratios);
}
