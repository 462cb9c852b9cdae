//! Fixed-step explicit integration.

use crate::error::{Error, Result};

/// One classical fourth-order Runge–Kutta step of `dy/dt = deriv(y, t)`.
pub fn rk4_step<const N: usize>(
    state: &[f64; N],
    t: f64,
    dt: f64,
    deriv: impl Fn(&[f64; N], f64) -> [f64; N],
) -> Result<[f64; N]> {
    if !(dt >= 0.0) {
        return Err(Error::param("dt", format!("must be non-negative, got {dt}")));
    }
    let eval = |y: &[f64; N], s: f64| -> Result<[f64; N]> {
        let d = deriv(y, s);
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::NonFiniteDerivative { t: s })
        }
    };
    let axpy = |y: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        let mut out = *y;
        out.iter_mut().zip(k).for_each(|(o, k)| *o += h * k);
        out
    };
    let k1 = eval(state, t)?;
    let k2 = eval(&axpy(state, &k1, 0.5 * dt), t + 0.5 * dt)?;
    let k3 = eval(&axpy(state, &k2, 0.5 * dt), t + 0.5 * dt)?;
    let k4 = eval(&axpy(state, &k3, dt), t + dt)?;
    let mut next = *state;
    for i in 0..N {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(next)
}

/// Quintic Hermite interpolation on `[0, h]` from value, first and second
/// derivative at both ends. Returns `(y, y', y'')` at offset `s`.
pub fn hermite5(h: f64, left: [f64; 3], right: [f64; 3], s: f64) -> [f64; 3] {
    let u = s / h;
    let (u2, u3, u4, u5) = (u * u, u * u * u, u.powi(4), u.powi(5));
    // basis polynomials and their u-derivatives
    let h0 = [1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5, -30.0 * u2 + 60.0 * u3 - 30.0 * u4, -60.0 * u + 180.0 * u2 - 120.0 * u3];
    let h1 = [u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5, 1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4, -36.0 * u + 96.0 * u2 - 60.0 * u3];
    let h2 = [0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5), 0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u4), 0.5 * (2.0 - 18.0 * u + 36.0 * u2 - 20.0 * u3)];
    let h3 = [10.0 * u3 - 15.0 * u4 + 6.0 * u5, 30.0 * u2 - 60.0 * u3 + 30.0 * u4, 60.0 * u - 180.0 * u2 + 120.0 * u3];
    let h4 = [-4.0 * u3 + 7.0 * u4 - 3.0 * u5, -12.0 * u2 + 28.0 * u3 - 15.0 * u4, -24.0 * u + 84.0 * u2 - 60.0 * u3];
    let h5 = [0.5 * (u3 - 2.0 * u4 + u5), 0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u4), 0.5 * (6.0 * u - 24.0 * u2 + 20.0 * u3)];
    let mut out = [0.0; 3];
    let scale = [1.0, 1.0 / h, 1.0 / (h * h)];
    for d in 0..3 {
        let v = h0[d] * left[0]
            + h * h1[d] * left[1]
            + h * h * h2[d] * left[2]
            + h3[d] * right[0]
            + h * h4[d] * right[1]
            + h * h * h5[d] * right[2];
        out[d] = v * scale[d];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator(y: &[f64; 2], _t: f64) -> [f64; 2] {
        [y[1], -y[0]]
    }

    fn period_error(dt: f64) -> f64 {
        let steps = (2.0 * PI / dt).round() as usize;
        let dt = 2.0 * PI / steps as f64;
        let mut y = [1.0, 0.0];
        for k in 0..steps {
            y = rk4_step(&y, k as f64 * dt, dt, oscillator).unwrap();
        }
        ((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt()
    }

    #[test]
    fn zero_rate_leaves_state() {
        let y = rk4_step(&[1.5, -2.0], 0.0, 0.1, |_, _| [0.0, 0.0]).unwrap();
        assert_eq!(y, [1.5, -2.0]);
    }

    #[test]
    fn exponential_growth() {
        let mut y = [1.0];
        for k in 0..10 {
            y = rk4_step(&y, k as f64 * 0.1, 0.1, |y, _| [y[0]]).unwrap();
        }
        // global RK4 error here is 7.7e-7 relative (2.1e-6 absolute)
        assert!((y[0] / std::f64::consts::E - 1.0).abs() < 1e-6);
    }

    #[test]
    fn oscillator_returns_after_one_period() {
        assert!(period_error(1e-3) < 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let ratio = period_error(0.04) / period_error(0.02);
        assert!((ratio - 16.0).abs() < 1.0, "ratio = {ratio}");
    }

    #[test]
    fn non_finite_rate_is_rejected() {
        let r = rk4_step(&[1.0], 0.0, 0.1, |_, _| [f64::NAN]);
        assert!(matches!(r, Err(Error::NonFiniteDerivative { .. })));
    }

    #[test]
    fn hermite_reproduces_quintic() {
        let p = |t: f64| [1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) - 0.2 * t.powi(5), 2.0 - 2.0 * t + 1.5 * t * t - t.powi(4), -2.0 + 3.0 * t - 4.0 * t.powi(3)];
        let h = 0.7;
        for s in [0.0, 0.1, 0.35, 0.7] {
            let got = hermite5(h, p(0.0), p(h), s);
            let want = p(s);
            for d in 0..3 {
                assert!((got[d] - want[d]).abs() < 1e-12, "d={d} s={s}");
            }
        }
    }
}
