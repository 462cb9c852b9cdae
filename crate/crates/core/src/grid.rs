//! Uniform periodic grid, real/complex fields on it, spectral calculus and
//! quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[x_min, x_max)` with `n_points` nodes.
///
/// Cloning is cheap: wavenumbers and FFT plans are shared.
#[derive(Clone)]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    wavenumbers: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("n_points", &self.n_points)
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.x_min == other.x_min && self.x_max == other.x_max
    }
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 64 || !n_points.is_power_of_two() {
            return Err(Error::InvalidSize(n_points));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::DegenerateExtent { x_min, x_max });
        }
        let length = x_max - x_min;
        let dx = length / n_points as f64;
        let dk = 2.0 * PI / length;
        let wavenumbers: Arc<[f64]> = (0..n_points)
            .map(|j| {
                if j < n_points / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n_points as f64) * dk
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Self { n_points, x_min, x_max, dx, wavenumbers, forward, inverse })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Wavenumber spacing 2π/L.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length()
    }

    /// Wavenumbers in DFT order (zero frequency first).
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.dx).round();
        j.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Unnormalized forward DFT in place.
    pub fn fft(&self, data: &mut [C64]) {
        self.forward.process(data);
    }

    /// Normalized inverse DFT in place (inverse of [`Grid1D::fft`]).
    pub fn ifft(&self, data: &mut [C64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n_points as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn real_field(&self, values: Vec<f64>) -> RealField {
        assert_eq!(values.len(), self.n_points, "field length must match grid");
        RealField { grid: self.clone(), values }
    }

    pub fn complex_field(&self, values: Vec<C64>) -> ComplexField {
        assert_eq!(values.len(), self.n_points, "field length must match grid");
        ComplexField { grid: self.clone(), values }
    }

    pub fn sample_real(&self, f: impl Fn(f64) -> f64 + Sync) -> RealField {
        let values = (0..self.n_points).into_par_iter().map(|j| f(self.x(j))).collect();
        RealField { grid: self.clone(), values }
    }

    pub fn sample_complex(&self, f: impl Fn(f64) -> C64 + Sync) -> ComplexField {
        let values = (0..self.n_points).into_par_iter().map(|j| f(self.x(j))).collect();
        ComplexField { grid: self.clone(), values }
    }
}

/// Real values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

/// Complex amplitudes on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid1D,
    pub values: Vec<C64>,
}

impl RealField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> ComplexField {
        self.grid.complex_field(self.values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> RealField {
        let values = self.values.iter().enumerate().map(|(j, &v)| f(self.grid.x(j), v)).collect();
        self.grid.real_field(values)
    }
}

impl ComplexField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn density(&self) -> RealField {
        self.grid.real_field(self.values.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit L2 norm.
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|z| *z /= n);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// ⟨self, other⟩ = ∫ conj(self)·other dx.
    pub fn inner(&self, other: &ComplexField) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.dx
    }

    pub fn l2_distance(&self, other: &ComplexField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.dx).sqrt()
    }

    /// Forward transform of the amplitudes (unnormalized DFT).
    pub fn spectrum(&self) -> Vec<C64> {
        let mut data = self.values.clone();
        self.grid.fft(&mut data);
        data
    }

    /// Fourier interpolant through the nodes, evaluable anywhere.
    pub fn interpolant(&self) -> SpectralInterpolant {
        SpectralInterpolant::new(self)
    }
}

/// Max |Ψ| on the outer 5% of the grid at either end.
pub fn boundary_leakage(psi: &ComplexField) -> f64 {
    let n = psi.len();
    let band = (n / 20).max(1);
    psi.values[..band]
        .iter()
        .chain(&psi.values[n - band..])
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Fourier-multiplier derivative of order 1 or 2.
///
/// The Nyquist mode is dropped for odd orders so real input stays real.
pub fn spectral_derivative(field: &ComplexField, order: u32) -> ComplexField {
    let grid = &field.grid;
    let mut data = field.values.clone();
    grid.fft(&mut data);
    let n = grid.n_points();
    for (j, (z, &k)) in data.iter_mut().zip(grid.wavenumbers()).enumerate() {
        let ik = C64::new(0.0, k);
        *z *= match order {
            0 => C64::new(1.0, 0.0),
            1 if j == n / 2 => C64::new(0.0, 0.0),
            o => ik.powu(o),
        };
    }
    grid.ifft(&mut data);
    grid.complex_field(data)
}

/// Spectral derivative of a real field.
pub fn spectral_derivative_real(field: &RealField, order: u32) -> RealField {
    let d = spectral_derivative(&field.to_complex(), order);
    field.grid.real_field(d.values.into_iter().map(|z| z.re).collect())
}

/// Riemann sum times dx; spectrally accurate for periodic, decayed integrands.
pub fn quadrature(field: &RealField) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.dx()
}

/// Band-limited interpolation of grid data through its discrete Fourier series.
#[derive(Debug, Clone)]
pub struct SpectralInterpolant {
    coeffs: Vec<C64>,
    x_min: f64,
    dk: f64,
}

impl SpectralInterpolant {
    fn new(field: &ComplexField) -> Self {
        let n = field.len();
        let mut coeffs = field.spectrum();
        coeffs.iter_mut().for_each(|c| *c /= n as f64);
        Self { coeffs, x_min: field.grid.x_min(), dk: field.grid.dk() }
    }

    /// Value of the interpolant at an arbitrary (finite) point.
    pub fn eval(&self, y: f64) -> C64 {
        let n = self.coeffs.len();
        let half = n / 2;
        let theta = self.dk * (y - self.x_min);
        let step = C64::from_polar(1.0, theta);
        let mut pos = C64::new(1.0, 0.0);
        let mut acc = self.coeffs[0];
        for j in 1..half {
            // re-anchor so the recurrence error stays at a few ulps
            pos = if j % 16 == 0 { C64::from_polar(1.0, j as f64 * theta) } else { pos * step };
            acc += self.coeffs[j] * pos + self.coeffs[n - j] * pos.conj();
        }
        // Nyquist mode split symmetrically between ±k.
        acc + self.coeffs[half] * (half as f64 * theta).cos()
    }

    pub fn eval_many(&self, points: &[f64]) -> Vec<C64> {
        points.par_iter().map(|&y| self.eval(y)).collect()
    }
}
