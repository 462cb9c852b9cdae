use nelson_core::states::{displace, dynamical_scale, hydrodynamic_decompose, observables, OperatorParams};
use nelson_core::{ComplexField, Grid1D, Units};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(512, -12.0, 12.0).unwrap()
}

/// Nodeless, generally non-Gaussian packet with a cubic phase.
#[derive(Debug, Clone, Copy)]
struct Packet {
    a: f64,
    s: f64,
    beta: f64,
    p: f64,
    q: f64,
    r: f64,
}

fn packet() -> impl Strategy<Value = Packet> {
    (-3.0f64..3.0, 0.4f64..1.2, 0.0f64..0.05, -3.0f64..3.0, -0.5f64..0.5, -0.05f64..0.05)
        .prop_map(|(a, s, beta, p, q, r)| Packet { a, s, beta, p, q, r })
}

impl Packet {
    fn sample(&self, grid: &Grid1D) -> ComplexField {
        let Packet { a, s, beta, p, q, r } = *self;
        grid.sample_complex(|x| {
            let y = x - a;
            C64::from_polar((-y * y / (4.0 * s * s) - beta * y.powi(4)).exp(), p * x + q * y * y + r * y.powi(3))
        })
        .normalized()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uncertainty_chain_holds(pk in packet(), mass in 0.5f64..2.0, hbar in 0.5f64..2.0) {
        let units = Units { hbar, mass };
        let r = observables(&pk.sample(&grid()), None, 0.0, units);
        let (upper, lower) = r.uncertainty_slack(units);
        prop_assert!(upper >= -1e-10 && lower >= -1e-10, "{upper} {lower}");
        let split = mass * mass * (r.delta_u.powi(2) + r.delta_v.powi(2));
        prop_assert!((r.delta_p.powi(2) - split).abs() < 1e-8 * (1.0 + split), "{} vs {split}", r.delta_p.powi(2));
    }

    #[test]
    fn gaussian_with_linear_phase_saturates(a in -3.0f64..3.0, s in 0.4f64..1.2, p in -3.0f64..3.0) {
        let pk = Packet { a, s, beta: 0.0, p, q: 0.0, r: 0.0 };
        let units = Units::default();
        let r = observables(&pk.sample(&grid()), None, 0.0, units);
        let (upper, lower) = r.uncertainty_slack(units);
        prop_assert!(upper.abs() < 1e-6 && lower.abs() < 1e-6, "{upper} {lower}");
    }

    #[test]
    fn decomposition_round_trips(pk in packet()) {
        let psi = pk.sample(&grid());
        let h = hydrodynamic_decompose(&psi, Units::default()).unwrap();
        let back = h.rebuild(1.0);
        let gap: f64 = (0..psi.len())
            .filter(|&j| h.trust_mask[j])
            .map(|j| (back.values[j] - psi.values[j]).norm_sqr())
            .sum::<f64>() * psi.grid.dx();
        prop_assert!(gap.sqrt() < 1e-9, "{}", gap.sqrt());
    }

    #[test]
    fn operators_are_unitary(
        pa in packet(), pb in packet(),
        x_cl in -2.0f64..2.0, v_cl in -2.0f64..2.0, phase in -3.0f64..3.0,
        sigma in 0.6f64..1.6, sigma_dot in -1.0f64..1.0,
    ) {
        let g = grid();
        // keep both packets inside the region the operators cannot wrap
        let shrink = |p: Packet| Packet { a: 0.4 * p.a, s: p.s.min(0.8), ..p };
        let (a, b) = (shrink(pa).sample(&g), shrink(pb).sample(&g));
        let op = OperatorParams::new(x_cl, v_cl, phase, sigma, sigma_dot, 1.0, Units::default()).unwrap();
        let before = a.inner(&b);
        let d = displace(&a, &op).unwrap().inner(&displace(&b, &op).unwrap());
        let s = dynamical_scale(&a, &op).unwrap().inner(&dynamical_scale(&b, &op).unwrap());
        prop_assert!((d - before).norm() < 1e-10, "{}", (d - before).norm());
        prop_assert!((s - before).norm() < 1e-10, "{}", (s - before).norm());
        prop_assert!((displace(&a, &op).unwrap().norm() - 1.0).abs() < 1e-10);
    }
}
