use std::sync::Arc;

use nelson_core::classical::integrate_trajectory;
use nelson_core::control::{coherent_control_sample, gauge_fix, ControlLaw, ControlPotential, Gauge};
use nelson_core::family::PacketFamily;
use nelson_core::propagation::tdse_propagate;
use nelson_core::{extract_shape, ground_state, Grid1D, GroundStateOptions, ShapeOptions, StaticPotential, Units};
use proptest::prelude::*;

fn family(pot: &StaticPotential, x0: f64, v0: f64, t_end: f64) -> PacketFamily {
    let grid = Grid1D::new(1024, -10.0, 10.0).unwrap();
    let s = ground_state(pot, &grid, Units::default(), &GroundStateOptions::default()).unwrap();
    let shape = Arc::new(extract_shape(&s, ShapeOptions::default()).unwrap());
    let tr = Arc::new(integrate_trajectory(pot, Units::default(), x0, v0, 1e-3, t_end, None).unwrap());
    PacketFamily::coherent(pot.clone(), shape, tr).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn quadratic_bases_are_pinned(omega in 0.7f64..1.8, x0 in -2.0f64..2.0, v0 in -1.0f64..1.0, t in 0.0f64..2.0) {
        let pot = StaticPotential::harmonic(1.0, omega).unwrap();
        let cp = ControlPotential::new(ControlLaw::Coherent, Gauge::ZeroAtCenter, family(&pot, x0, v0, 2.0)).unwrap();
        let grid = Grid1D::new(1024, -12.0, 12.0).unwrap();
        let x = cp.family.point(t).unwrap().x;
        let fixed = gauge_fix(&coherent_control_sample(&cp, &grid, t).unwrap(), x, pot.evaluate(x));
        let dev = fixed.max_abs_diff(&pot.sample(&grid).values);
        prop_assert!(dev < 1e-9, "{dev}");
    }
}

#[test]
fn density_does_not_depend_on_the_gauge() {
    let pot = StaticPotential::quartic(1.0, 1.0, 0.1).unwrap();
    let fam = family(&pot, 1.0, 0.2, 1.5);
    let grid = Grid1D::new(512, -12.0, 12.0).unwrap();
    let psi = fam.wavefunction(&grid, 0.0).unwrap();
    let run = |gauge| {
        let cp = ControlPotential::new(ControlLaw::Coherent, gauge, fam.clone()).unwrap();
        tdse_propagate(&psi, &cp, Units::default(), 1e-3, 1500, 1500, &Default::default()).unwrap().final_state
    };
    let (a, b) = (run(Gauge::Raw), run(Gauge::ZeroAtCenter));
    let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "{gap}");
}
