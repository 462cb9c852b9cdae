//! Static potential families V(x) with analytic gradients.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, RealField};

/// A time-independent external potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StaticPotential {
    /// ½ m ω² x²
    Harmonic { mass: f64, omega: f64 },
    /// ½ m ω² x² + λ x⁴
    AnharmonicQuartic { mass: f64, omega: f64, lambda: f64 },
    /// −½ a x² + ¼ b x⁴
    DoubleWell { a: f64, b: f64 },
    /// D_e (1 − exp(−α (x − x_e)))²
    Morse { depth: f64, alpha: f64, x_e: f64 },
    /// Natural cubic spline through user samples.
    Tabulated(#[serde(skip)] Arc<CubicSpline>),
}

impl StaticPotential {
    pub fn harmonic(mass: f64, omega: f64) -> Result<Self> {
        positive("mass", mass)?;
        positive("omega", omega)?;
        Ok(Self::Harmonic { mass, omega })
    }

    pub fn quartic(mass: f64, omega: f64, lambda: f64) -> Result<Self> {
        positive("mass", mass)?;
        positive("omega", omega)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be finite and non-negative"));
        }
        Ok(Self::AnharmonicQuartic { mass, omega, lambda })
    }

    pub fn double_well(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::param("a", "must be finite"));
        }
        positive("b", b)?;
        Ok(Self::DoubleWell { a, b })
    }

    pub fn morse(depth: f64, alpha: f64, x_e: f64) -> Result<Self> {
        positive("depth", depth)?;
        positive("alpha", alpha)?;
        if !x_e.is_finite() {
            return Err(Error::param("x_e", "must be finite"));
        }
        Ok(Self::Morse { depth, alpha, x_e })
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self::Tabulated(Arc::new(CubicSpline::natural(xs, values)?)))
    }

    /// Reads a two-column `x,V` CSV (an optional header line is skipped).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let (mut xs, mut vs) = (Vec::new(), Vec::new());
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok());
            match (parse(0), parse(1)) {
                (Some(x), Some(v)) => {
                    xs.push(x);
                    vs.push(v);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: line + 1,
                        message: "expected two numeric columns x,V".into(),
                    })
                }
            }
        }
        Self::tabulated(xs, vs)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Harmonic { .. } => "harmonic",
            Self::AnharmonicQuartic { .. } => "anharmonic-quartic",
            Self::DoubleWell { .. } => "double-well",
            Self::Morse { .. } => "morse",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// True when V is a polynomial of degree ≤ 2.
    pub fn is_quadratic(&self) -> bool {
        match self {
            Self::Harmonic { .. } => true,
            Self::AnharmonicQuartic { lambda, .. } => *lambda == 0.0,
            _ => false,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Self::Harmonic { mass, omega } => 0.5 * mass * omega * omega * x * x,
            Self::AnharmonicQuartic { mass, omega, lambda } => {
                let x2 = x * x;
                0.5 * mass * omega * omega * x2 + lambda * x2 * x2
            }
            Self::DoubleWell { a, b } => {
                let x2 = x * x;
                -0.5 * a * x2 + 0.25 * b * x2 * x2
            }
            Self::Morse { depth, alpha, x_e } => {
                let e = 1.0 - (-alpha * (x - x_e)).exp();
                depth * e * e
            }
            Self::Tabulated(s) => s.value(x),
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match self {
            Self::Harmonic { mass, omega } => mass * omega * omega * x,
            Self::AnharmonicQuartic { mass, omega, lambda } => mass * omega * omega * x + 4.0 * lambda * x * x * x,
            Self::DoubleWell { a, b } => -a * x + b * x * x * x,
            Self::Morse { depth, alpha, x_e } => {
                let e = (-alpha * (x - x_e)).exp();
                2.0 * depth * alpha * e * (1.0 - e)
            }
            Self::Tabulated(s) => s.derivative(x),
        }
    }

    /// A local minimum of V, where one is known in closed form.
    pub fn local_minimum(&self) -> Option<f64> {
        match self {
            Self::Harmonic { .. } | Self::AnharmonicQuartic { .. } => Some(0.0),
            Self::DoubleWell { a, b } => Some(if *a > 0.0 { (a / b).sqrt() } else { 0.0 }),
            Self::Morse { x_e, .. } => Some(*x_e),
            Self::Tabulated(s) => s.lowest_node(),
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> PotentialSample {
        PotentialSample {
            values: grid.sample_real(|x| self.evaluate(x)),
            gradient: grid.sample_real(|x| self.gradient(x)),
        }
    }

    /// Nodewise `scale² · V(scale · (x − shift))`.
    pub fn shifted_scaled_sample(&self, grid: &Grid1D, shift: f64, scale: f64) -> Result<RealField> {
        positive("scale", scale)?;
        let s2 = scale * scale;
        Ok(grid.sample_real(|x| s2 * self.evaluate(scale * (x - shift))))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// Potential values and gradient on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub values: RealField,
    pub gradient: RealField,
}

impl PotentialSample {
    /// Gradient at an arbitrary point by four-point Lagrange interpolation.
    pub fn gradient_at(&self, x: f64) -> f64 {
        lagrange4(&self.gradient, x)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        lagrange4(&self.values, x)
    }
}

/// Cubic (four-point) Lagrange interpolation of a sampled field.
pub fn lagrange4(field: &RealField, x: f64) -> f64 {
    let g = &field.grid;
    let n = g.n_points();
    let s = (x - g.x_min()) / g.dx();
    let j = (s.floor() as isize).clamp(1, n as isize - 3) as usize;
    let u = s - j as f64;
    let f = &field.values;
    let (fm, f0, f1, f2) = (f[j - 1], f[j], f[j + 1], f[j + 2]);
    -u * (u - 1.0) * (u - 2.0) / 6.0 * fm + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * f0
        - (u + 1.0) * u * (u - 2.0) / 2.0 * f1
        + (u + 1.0) * u * (u - 1.0) / 6.0 * f2
}

/// Quintic (six-point) Lagrange interpolation of a sampled field.
pub fn lagrange6(field: &RealField, x: f64) -> f64 {
    let g = &field.grid;
    let n = g.n_points();
    let s = (x - g.x_min()) / g.dx();
    let j0 = (s.floor() as isize - 2).clamp(0, n as isize - 6) as usize;
    let u = s - j0 as f64;
    (0..6)
        .map(|i| {
            let li: f64 = (0..6).filter(|&m| m != i).map(|m| (u - m as f64) / (i as f64 - m as f64)).product();
            li * field.values[j0 + i]
        })
        .sum()
}

/// Natural cubic spline with linear extrapolation beyond the table.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::param("table", "need at least three (x, V) rows"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::param("table", "x must be strictly increasing and all values finite"));
        }
        // Thomas algorithm for the interior second derivatives.
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { xs, ys, m })
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] + self.derivative(self.xs[0]) * (x - self.xs[0]);
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] + self.derivative(self.xs[n - 1]) * (x - self.xs[n - 1]);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i] + b * self.ys[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let xc = x.clamp(self.xs[0], self.xs[n - 1]);
        let i = self.segment(xc);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - xc) / h;
        let b = (xc - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.m[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.m[i + 1]
    }

    /// Second derivative; zero outside the table.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let b = (x - self.xs[i]) / h;
        (1.0 - b) * self.m[i] + b * self.m[i + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    fn lowest_node(&self) -> Option<f64> {
        self.xs
            .iter()
            .zip(&self.ys)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(x, _)| *x)
    }
}
