//! Controlling potentials that force a packet family to solve the
//! Schrödinger equation exactly.
//!
//! With `k = σ₀/σ` and `y = x − x_cl`, the closed form is
//!
//! ```text
//! Ṽ(x,t) = k² V(c₀ + k y) − m a_cl x − (m σ̈ / 2σ) y²
//! ```
//!
//! which reduces to `V(x − x_cl) − m a_cl x` for constant width. The same
//! potential can be read off numerically from the Hamilton–Jacobi–Madelung
//! equation of any sampled family, which is the independent route used to
//! validate the closed forms.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FamilyPoint, PacketFamily};
use crate::grid::{spectral_derivative, ComplexField, Grid1D, RealField};
use crate::potential::{lagrange6, PotentialSample, StaticPotential};
use crate::Units;

/// Sign of the linear `m a_cl x` correction. Pinned by requiring quadratic
/// bases to be fixed points of the construction.
pub const LINEAR_SIGN: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlLaw {
    Coherent,
    Squeezed,
    #[serde(alias = "residual")]
    HjmResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    Raw,
    #[default]
    ZeroAtCenter,
}

/// Anything that can supply a potential on a grid at time `t`.
pub trait PotentialDrive: Sync {
    fn sample_at(&self, grid: &Grid1D, t: f64) -> Result<PotentialSample>;

    fn values_at(&self, grid: &Grid1D, t: f64) -> Result<RealField> {
        Ok(self.sample_at(grid, t)?.values)
    }

    /// Covered time span; `None` when time-independent.
    fn span(&self) -> Option<(f64, f64)>;

    fn label(&self) -> String;
}

impl PotentialDrive for StaticPotential {
    fn sample_at(&self, grid: &Grid1D, _t: f64) -> Result<PotentialSample> {
        Ok(self.sample(grid))
    }

    fn span(&self) -> Option<(f64, f64)> {
        None
    }

    fn label(&self) -> String {
        self.family_name().to_string()
    }
}

#[derive(Debug, Clone)]
pub struct ControlPotential {
    pub law: ControlLaw,
    pub gauge: Gauge,
    /// Use the alternative squeezed form `V(x − x_cl) + m(a − σ̈x_cl/σ)x + (mσ̈/2σ)x²`
    /// instead of the self-consistent one. For comparisons only.
    pub compat_eq50: bool,
    pub family: PacketFamily,
}

impl ControlPotential {
    pub fn new(law: ControlLaw, gauge: Gauge, family: PacketFamily) -> Result<Self> {
        match (law, family.is_squeezed()) {
            (ControlLaw::Coherent, true) => Err(Error::param("law", "coherent control needs a constant-width family")),
            (ControlLaw::Squeezed, false) => Err(Error::param("law", "squeezed control needs an envelope")),
            _ => Ok(Self { law, gauge, compat_eq50: false, family }),
        }
    }

    pub fn with_compat_eq50(mut self, on: bool) -> Self {
        self.compat_eq50 = on;
        self
    }

    pub fn base(&self) -> &StaticPotential {
        &self.family.base
    }

    fn units(&self) -> Units {
        self.family.units()
    }

    /// Closed-form value and gradient at `x` for family parameters `p`,
    /// before gauge fixing.
    fn closed_form(&self, p: &FamilyPoint, x: f64) -> (f64, f64) {
        let m = self.units().mass;
        let base = &self.family.base;
        let (sigma, sigma_ddot) = match self.law {
            ControlLaw::Coherent => (self.family.shape.sigma0, 0.0),
            _ => (p.sigma, p.sigma_ddot),
        };
        let y = x - p.x;
        let curv = m * sigma_ddot / sigma;
        if self.compat_eq50 && self.law == ControlLaw::Squeezed {
            let lin = m * (p.a - sigma_ddot * p.x / sigma);
            return (base.evaluate(y) + lin * x + 0.5 * curv * x * x, base.gradient(y) + lin + curv * x);
        }
        let k = self.family.shape.sigma0 / sigma;
        let z = self.family.shape.center + k * y;
        (
            k * k * base.evaluate(z) + LINEAR_SIGN * m * p.a * x - 0.5 * curv * y * y,
            k * k * k * base.gradient(z) + LINEAR_SIGN * m * p.a - curv * y,
        )
    }

    fn closed_form_sample(&self, grid: &Grid1D, t: f64) -> Result<PotentialSample> {
        let p = self.family.point(t)?;
        let offset = match self.gauge {
            Gauge::Raw => 0.0,
            Gauge::ZeroAtCenter => self.closed_form(&p, p.x).0,
        };
        let pairs: Vec<(f64, f64)> = grid.nodes().par_iter().map(|&x| self.closed_form(&p, x)).collect();
        Ok(PotentialSample {
            values: grid.real_field(pairs.iter().map(|v| v.0 - offset).collect()),
            gradient: grid.real_field(pairs.into_iter().map(|v| v.1).collect()),
        })
    }

    /// Potential value at one point, gauge applied.
    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        let p = self.family.point(t)?;
        let offset = match self.gauge {
            Gauge::Raw => 0.0,
            Gauge::ZeroAtCenter => self.closed_form(&p, p.x).0,
        };
        Ok(self.closed_form(&p, x).0 - offset)
    }

    /// Gradient at one point (closed-form laws only).
    pub fn gradient(&self, x: f64, t: f64) -> Result<f64> {
        let p = self.family.point(t)?;
        Ok(self.closed_form(&p, x).1)
    }

    /// Writes `t, x, V` rows for each requested time.
    pub fn write_slices_csv(&self, grid: &Grid1D, times: &[f64], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "V"])?;
        for &t in times {
            let v = self.values_at(grid, t)?;
            for (j, val) in v.values.iter().enumerate() {
                w.write_record(&[t, grid.x(j), *val].map(|v| format!("{v:.17e}")))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl PotentialDrive for ControlPotential {
    fn sample_at(&self, grid: &Grid1D, t: f64) -> Result<PotentialSample> {
        match self.law {
            ControlLaw::Coherent | ControlLaw::Squeezed => self.closed_form_sample(grid, t),
            ControlLaw::HjmResidual => {
                let r = hjm_residual_sample(&self.family, grid, t, self.gauge)?;
                let gradient = fd_gradient(&r.values);
                Ok(PotentialSample { values: r.values, gradient })
            }
        }
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some((self.family.start(), self.family.end()))
    }

    fn label(&self) -> String {
        let law = match self.law {
            ControlLaw::Coherent => "coherent",
            ControlLaw::Squeezed if self.compat_eq50 => "squeezed-compat",
            ControlLaw::Squeezed => "squeezed",
            ControlLaw::HjmResidual => "hjm-residual",
        };
        format!("{law}({})", self.family.base.family_name())
    }
}

fn expect_law(cp: &ControlPotential, law: ControlLaw) -> Result<()> {
    if cp.law == law {
        Ok(())
    } else {
        Err(Error::param("law", format!("expected {law:?}, got {:?}", cp.law)))
    }
}

/// Coherent closed form on `grid` at `t`, gauge applied.
pub fn coherent_control_sample(cp: &ControlPotential, grid: &Grid1D, t: f64) -> Result<RealField> {
    expect_law(cp, ControlLaw::Coherent)?;
    Ok(cp.closed_form_sample(grid, t)?.values)
}

/// Squeezed closed form on `grid` at `t`, gauge applied.
pub fn squeezed_control_sample(cp: &ControlPotential, grid: &Grid1D, t: f64) -> Result<RealField> {
    expect_law(cp, ControlLaw::Squeezed)?;
    Ok(cp.closed_form_sample(grid, t)?.values)
}

/// Shifts `field` so its (interpolated) value at `x_ref` equals `v_ref`.
pub fn gauge_fix(field: &RealField, x_ref: f64, v_ref: f64) -> RealField {
    let shift = v_ref - lagrange6(field, x_ref);
    field.map(|_, v| v + shift)
}

/// A potential read off from a sampled family, with the nodes on which the
/// read-off is meaningful.
#[derive(Debug, Clone)]
pub struct ResidualSample {
    pub values: RealField,
    pub trusted: Vec<bool>,
}

impl ResidualSample {
    /// Max |self − other| over trusted nodes.
    pub fn max_deviation(&self, other: &RealField) -> f64 {
        self.values
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.trusted)
            .filter(|(_, &t)| t)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Reads the potential off the Hamilton–Jacobi–Madelung equation
/// `Ṽ = −[∂_t S + (m/2)v² − (m/2)u² − (ħ/2)u']` for the family member at
/// `t`, with `∂_t S` from centred differences over the trajectory step.
///
/// Outside the trusted window values are extrapolated quadratically.
pub fn hjm_residual_sample(family: &PacketFamily, grid: &Grid1D, t: f64, gauge: Gauge) -> Result<ResidualSample> {
    let h = family.trajectory.dt;
    let Units { hbar, mass: m } = family.units();
    let now = family.wavefunction(grid, t)?;
    // five-point stencil, centred where the span allows
    let tol = 1e-9 * h;
    let before = ((t - family.start() + tol) / h).floor().max(0.0) as usize;
    let after = ((family.end() - t + tol) / h).floor().max(0.0) as usize;
    let pos = if before < 2 { before } else if after < 2 { 4usize.saturating_sub(after) } else { 2 };
    if pos > before || pos + after < 4 {
        return Err(Error::TimeOutOfRange { t, start: family.start(), end: family.end() });
    }
    let stencil: Vec<ComplexField> = (0..5)
        .map(|i| {
            if i == pos {
                Ok(now.clone())
            } else {
                family.wavefunction(grid, t + (i as f64 - pos as f64) * h)
            }
        })
        .collect::<Result<_>>()?;
    let coeffs = FIVE_POINT[pos];
    let d1 = spectral_derivative(&now, 1);
    let d2 = spectral_derivative(&now, 2);
    let p = family.point(t)?;

    let opts = family.shape.options;
    let n = grid.n_points();
    let trusted: Vec<bool> = (0..n)
        .map(|j| {
            let xi = (grid.x(j) - p.x) / p.sigma;
            xi.abs() <= opts.xi_window && p.sigma * now.values[j].norm_sqr() > opts.density_floor
        })
        .collect();
    if !trusted.iter().any(|&t| t) {
        return Err(Error::DensityUnderflow { xi: 0.0 });
    }
    let mut values: Vec<f64> = (0..n)
        .map(|j| {
            if !trusted[j] {
                return f64::NAN;
            }
            let psi = now.values[j];
            let r1 = d1.values[j] / psi;
            let r2 = d2.values[j] / psi;
            let u = hbar / m * r1.re;
            let v = hbar / m * r1.im;
            let du = hbar / m * (r2 - r1 * r1).re;
            let dsdt = stencil_phase_rate(&stencil, &coeffs, j, hbar, h);
            -(dsdt + 0.5 * m * v * v - 0.5 * m * u * u - 0.5 * hbar * du)
        })
        .collect();
    extrapolate_quadratic(&mut values, &trusted);
    let mut field = grid.real_field(values);
    if gauge == Gauge::ZeroAtCenter {
        field = gauge_fix(&field, p.x, 0.0);
    }
    Ok(ResidualSample { values: field, trusted })
}

/// First-derivative weights (times 12h) on five equally spaced points,
/// indexed by the position of the evaluation point.
const FIVE_POINT: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

/// ħ ∂_t arg Ψ at node `j` from equally spaced slices. The stencil acts on
/// phase increments between neighbours, so no unwrapping is needed.
fn stencil_phase_rate(slices: &[ComplexField], coeffs: &[f64; 5], j: usize, hbar: f64, h: f64) -> f64 {
    let mut rate = 0.0;
    let mut tail: f64 = coeffs.iter().sum();
    for l in 0..slices.len() - 1 {
        tail -= coeffs[l];
        let d = (slices[l + 1].values[j] * slices[l].values[j].conj()).arg();
        rate += tail * d;
    }
    hbar * rate / (12.0 * h)
}

fn extrapolate_quadratic(values: &mut [f64], trusted: &[bool]) {
    let (Some(a), Some(b)) = (trusted.iter().position(|&t| t), trusted.iter().rposition(|&t| t)) else { return };
    // interior gaps (should not occur for nodeless states) get linear fill
    let mut last = a;
    for j in a + 1..=b {
        if trusted[j] {
            for g in last + 1..j {
                let s = (g - last) as f64 / (j - last) as f64;
                values[g] = values[last] * (1.0 - s) + values[j] * s;
            }
            last = j;
        }
    }
    if b >= a + 2 {
        let (f0, f1, f2) = (values[a], values[a + 1], values[a + 2]);
        for j in 0..a {
            let s = j as f64 - a as f64;
            values[j] = f0 + s * (f1 - f0) + 0.5 * s * (s - 1.0) * (f2 - 2.0 * f1 + f0);
        }
        let (g0, g1, g2) = (values[b], values[b - 1], values[b - 2]);
        for j in b + 1..values.len() {
            let s = (j - b) as f64;
            values[j] = g0 + s * (g0 - g1) + 0.5 * s * (s + 1.0) * (g0 - 2.0 * g1 + g2);
        }
    } else {
        let (fa, fb) = (values[a], values[b]);
        values[..a].iter_mut().for_each(|v| *v = fa);
        values[b + 1..].iter_mut().for_each(|v| *v = fb);
    }
}

/// Fourth-order central differences, one-sided at the ends.
fn fd_gradient(field: &RealField) -> RealField {
    let f = &field.values;
    let n = f.len();
    let h = field.grid.dx();
    let g = (0..n)
        .map(|j| {
            if j >= 2 && j + 2 < n {
                (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * h)
            } else if j + 1 < n && j > 0 {
                (f[j + 1] - f[j - 1]) / (2.0 * h)
            } else if j == 0 {
                (f[1] - f[0]) / h
            } else {
                (f[n - 1] - f[n - 2]) / h
            }
        })
        .collect();
    field.grid.real_field(g)
}

/// Both sides of the centre relation
/// `Ṽ'(x_cl) − ⟨Ṽ'⟩ = [(m/2)(u²)' + (ħ/2)u'']_{ξ=0}`, evaluated with the
/// controlling potential of a coherent law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenterCheck {
    pub t: f64,
    pub force_side: f64,
    pub quantum_side: f64,
    pub residual: f64,
}

pub fn center_consistency_check(cp: &ControlPotential, t: f64) -> Result<CenterCheck> {
    let shape = &cp.family.shape;
    let p = cp.family.point(t)?;
    let sigma = if cp.law == ControlLaw::Coherent { shape.sigma0 } else { p.sigma };
    let at_centre = cp.closed_form(&p, p.x).1;
    let mean: f64 = shape.quadrature_nodes().iter().map(|&(xi, w)| cp.closed_form(&p, p.x + sigma * xi).1 * w).sum();
    let force_side = at_centre - mean;

    let Units { hbar, mass: m } = shape.units;
    let seed = shape.seed();
    let at = |order: u32| -> f64 { spectral_derivative(seed, order).interpolant().eval(shape.center).re };
    let psi = seed.interpolant().eval(shape.center).re;
    let (d1, d2, d3) = (at(1) / psi, at(2) / psi, at(3) / psi);
    // u = (ħ/m)r with r = ψ'/ψ; r' = ψ''/ψ − r², r'' = ψ'''/ψ − 3rψ''/ψ + 2r³
    let r = d1;
    let dr = d2 - r * r;
    let ddr = d3 - 3.0 * r * d2 + 2.0 * r * r * r;
    let (u, du, ddu) = (hbar / m * r, hbar / m * dr, hbar / m * ddr);
    let quantum_side = m * u * du + 0.5 * hbar * ddu;
    Ok(CenterCheck { t, force_side, quantum_side, residual: force_side - quantum_side })
}
