use fourier_pinn::autodiff::{Tape, Tensor};
use fourier_pinn::losses::quantile_reduce;
use fourier_pinn::spectral::{FftPlan, SpectralSymbol};
use num_complex::Complex64;
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = Vec<f64>> {
    (1usize..200).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))
}

proptest! {
    #[test]
    fn fft_round_trip(re in signal()) {
        let n = re.len();
        let im: Vec<f64> = re.iter().map(|v| 0.5 * v.sin()).collect();
        let (mut a, mut b) = (re.clone(), im.clone());
        let plan = FftPlan::new(n);
        plan.forward(&mut a, &mut b);
        plan.inverse(&mut a, &mut b);
        for k in 0..n {
            prop_assert!((a[k] - re[k]).abs() < 1e-9 && (b[k] - im[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn real_signal_spectrum_is_hermitian(re in signal()) {
        let n = re.len();
        let (mut a, mut b) = (re.clone(), vec![0.0; n]);
        FftPlan::new(n).forward(&mut a, &mut b);
        let scale = 1.0 + re.iter().map(|v| v.abs()).sum::<f64>();
        for k in 1..n {
            prop_assert!((a[k] - a[n - k]).abs() < 1e-12 * scale);
            prop_assert!((b[k] + b[n - k]).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn quantile_is_an_order_statistic(v in prop::collection::vec(-1e3f64..1e3, 1..60), tau in 0.01f64..1.0) {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(v.clone()));
        let q = quantile_reduce(&mut tape, x, tau).unwrap();
        let y = tape.scalar(q);
        let below = v.iter().filter(|&&a| a <= y).count();
        prop_assert!(v.contains(&y));
        prop_assert!(below as f64 >= tau * v.len() as f64 - 1e-9);
        let g = tape.backward(q).unwrap().get_or_zeros(x, &[v.len()]).into_data();
        prop_assert_eq!(g.iter().filter(|&&d| d != 0.0).count(), 1);
    }

    #[test]
    fn polynomial_symbol_is_a_polynomial(c in prop::collection::vec(-3.0f64..3.0, 1..5), xi in -20.0f64..20.0) {
        let p = SpectralSymbol::polynomial(&c).unwrap();
        let z = Complex64::new(0.0, 2.0 * std::f64::consts::PI * xi);
        let expect = c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
        let got = p.eval(&[xi]);
        prop_assert!((got - expect).norm() <= 1e-9 * (1.0 + expect.norm()));
    }
}
