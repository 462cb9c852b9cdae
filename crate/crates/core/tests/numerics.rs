use nelson_core::grid::spectral_derivative;
use nelson_core::ode::rk4_step;
use nelson_core::{Grid1D, RngStream};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn field(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip_preserves_norm(data in field(256)) {
        let grid = Grid1D::new(256, -5.0, 5.0).unwrap();
        let before: f64 = data.iter().map(|z| z.norm_sqr()).sum();
        let mut work = data.clone();
        grid.fft(&mut work);
        let spectral: f64 = work.iter().map(|z| z.norm_sqr()).sum::<f64>() / 256.0;
        grid.ifft(&mut work);
        let after: f64 = work.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((spectral - before).abs() <= 1e-12 * before);
        prop_assert!((after - before).abs() <= 1e-12 * before);
        let back = work.iter().zip(&data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(back < 1e-13);
    }

    #[test]
    fn derivative_is_linear(f in field(128), g in field(128), a in -3.0f64..3.0, b in -3.0f64..3.0, order in 1u32..=2) {
        let grid = Grid1D::new(128, -4.0, 4.0).unwrap();
        let (ff, gg) = (grid.complex_field(f.clone()), grid.complex_field(g.clone()));
        let mix = grid.complex_field(f.iter().zip(&g).map(|(x, y)| x * a + y * b).collect());
        let lhs = spectral_derivative(&mix, order);
        let (df, dg) = (spectral_derivative(&ff, order), spectral_derivative(&gg, order));
        let scale = lhs.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for j in 0..128 {
            prop_assert!((lhs.values[j] - (df.values[j] * a + dg.values[j] * b)).norm() <= 1e-12 * scale);
        }
    }
}

#[test]
fn rk4_is_fourth_order_on_the_oscillator() {
    let run = |dt: f64| {
        let mut y = [1.0, 0.0];
        let n = (5.0 / dt).round() as usize;
        for k in 0..n {
            y = rk4_step(&y, k as f64 * dt, dt, |y, _| [y[1], -y[0]]).unwrap();
        }
        ((y[0] - 5f64.cos()).powi(2) + (y[1] + 5f64.sin()).powi(2)).sqrt()
    };
    let ratio = run(0.05) / run(0.025);
    assert!((14.0..18.0).contains(&ratio), "{ratio}");
}

#[test]
fn gaussian_draws_look_normal() {
    let x = RngStream::new(99, 3).gaussian_draws(1_000_000);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = m(2);
    let skew = m(3) / var.powf(1.5);
    let kurt = m(4) / (var * var) - 3.0;
    assert!(mean.abs() < 5e-3 && (var - 1.0).abs() < 5e-3, "{mean} {var}");
    assert!(skew.abs() < 0.05 && kurt.abs() < 0.05, "{skew} {kurt}");
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let s = RngStream::new(5, 0);
    assert_eq!(s.child(3).gaussian_draws(16), s.child(3).gaussian_draws(16));
    assert_ne!(s.child(3).gaussian_draws(16), s.child(4).gaussian_draws(16));
    assert_ne!(s.gaussian_draws(16), RngStream::new(6, 0).gaussian_draws(16));
}
