//! Controlled states on a grid, their hydrodynamic (Madelung) fields, the
//! stochastic-mechanics observables, and the displacement and dynamical
//! scaling operators.

use std::path::Path;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{FamilyPoint, PacketFamily};
use crate::grid::{boundary_leakage, spectral_derivative, ComplexField, Grid1D, RealField};
use crate::potential::PotentialSample;
use crate::Units;

/// Density floor of the hydrodynamic trust mask.
pub const TRUST_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct HydrodynamicFields {
    pub rho: RealField,
    /// ħ × phase, unwrapped from the density maximum outwards.
    pub s: RealField,
    pub u: RealField,
    pub v: RealField,
    pub trust_mask: Vec<bool>,
}

/// Splits `psi` into `ρ`, `S`, `u = (ħ/2m)∂ ln ρ` and `v = ∂S/m`.
///
/// Outside the trust mask `u` and `v` carry the nearest trusted value.
pub fn hydrodynamic_decompose(psi: &ComplexField, units: Units) -> Result<HydrodynamicFields> {
    let grid = &psi.grid;
    let n = grid.n_points();
    let Units { hbar, mass: m } = units;
    let rho = psi.density();
    let trust_mask: Vec<bool> = rho.values.iter().map(|&r| r > TRUST_FLOOR).collect();
    let (Some(a), Some(b)) = (trust_mask.iter().position(|&t| t), trust_mask.iter().rposition(|&t| t)) else {
        return Err(Error::DensityUnderflow { xi: 0.0 });
    };
    if let Some(j) = (a..=b).find(|&j| !trust_mask[j]) {
        return Err(Error::NodeDetected { x: grid.x(j) });
    }

    let d1 = spectral_derivative(psi, 1);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    for j in a..=b {
        let r = d1.values[j] / psi.values[j];
        u[j] = hbar / m * r.re;
        v[j] = hbar / m * r.im;
    }
    let (ua, va, ub, vb) = (u[a], v[a], u[b], v[b]);
    for j in 0..a {
        u[j] = ua;
        v[j] = va;
    }
    for j in b + 1..n {
        u[j] = ub;
        v[j] = vb;
    }

    // unwrap outwards from the peak; a jump near π means the phase is
    // unresolved or passes through a node
    let peak = (a..=b).max_by(|&i, &j| rho.values[i].total_cmp(&rho.values[j])).unwrap_or(a);
    let mut phase = vec![0.0; n];
    phase[peak] = psi.values[peak].arg();
    let step = |from: usize, to: usize, phase: &mut Vec<f64>| -> Result<()> {
        let d = (psi.values[to] * psi.values[from].conj()).arg();
        if d.abs() > 0.9 * std::f64::consts::PI && trust_mask[to] {
            return Err(Error::NodeDetected { x: grid.x(to) });
        }
        phase[to] = phase[from] + d;
        Ok(())
    };
    for j in peak + 1..n {
        step(j - 1, j, &mut phase)?;
    }
    for j in (0..peak).rev() {
        step(j + 1, j, &mut phase)?;
    }
    let s = grid.real_field(phase.into_iter().map(|p| hbar * p).collect());
    Ok(HydrodynamicFields { rho, s, u: grid.real_field(u), v: grid.real_field(v), trust_mask })
}

impl HydrodynamicFields {
    /// `√ρ exp(iS/ħ)`.
    pub fn rebuild(&self, hbar: f64) -> ComplexField {
        let values = self.rho.values.iter().zip(&self.s.values).map(|(&r, &s)| C64::from_polar(r.sqrt(), s / hbar)).collect();
        self.rho.grid.complex_field(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub delta_x: f64,
    pub delta_p: f64,
    pub delta_u: f64,
    pub delta_v: f64,
    pub anticomm: f64,
    pub norm: f64,
    /// ⟨T⟩ + ⟨V⟩, or ⟨T⟩ alone when no potential was supplied.
    pub energy: f64,
    /// ⟨V'⟩ − V'(⟨x⟩); NaN without a potential.
    pub ehrenfest_gap: f64,
    pub boundary_leakage: f64,
}

pub const OBSERVABLE_COLUMNS: [&str; 12] = [
    "t",
    "mean_x",
    "mean_p",
    "delta_x",
    "delta_p",
    "delta_u",
    "delta_v",
    "anticomm",
    "norm",
    "energy",
    "ehrenfest_gap",
    "leakage",
];

impl ObservableRecord {
    /// Slack in `Δx Δp ≥ m Δx Δu` and in `m Δx Δu ≥ ħ/2`.
    pub fn uncertainty_slack(&self, units: Units) -> (f64, f64) {
        let osmotic = units.mass * self.delta_x * self.delta_u;
        (self.delta_x * self.delta_p - osmotic, osmotic - 0.5 * units.hbar)
    }

    fn row(&self) -> [f64; 12] {
        [
            self.t,
            self.mean_x,
            self.mean_p,
            self.delta_x,
            self.delta_p,
            self.delta_u,
            self.delta_v,
            self.anticomm,
            self.norm,
            self.energy,
            self.ehrenfest_gap,
            self.boundary_leakage,
        ]
    }
}

pub fn write_observables_csv(records: &[ObservableRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(OBSERVABLE_COLUMNS)?;
    for r in records {
        w.write_record(r.row().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `x, re_psi, im_psi, rho`.
pub fn write_state_csv(psi: &ComplexField, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "re_psi", "im_psi", "rho"])?;
    for (j, z) in psi.values.iter().enumerate() {
        w.write_record([psi.grid.x(j), z.re, z.im, z.norm_sqr()].map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Moments of `psi` by quadrature; momentum moments in Fourier space.
pub fn observables(psi: &ComplexField, pot: Option<&PotentialSample>, t: f64, units: Units) -> ObservableRecord {
    let grid = &psi.grid;
    let Units { hbar, mass: m } = units;
    let dx = grid.dx();
    let n = grid.n_points();
    let norm = psi.norm_sqr();
    let inv = 1.0 / norm;

    let d1 = spectral_derivative(psi, 1);
    // per node: xρ, x²ρ, uρ, vρ, u²ρ, v²ρ, xvρ; summed in node order so the
    // result does not depend on scheduling
    let terms: Vec<[f64; 7]> = (0..n)
        .into_par_iter()
        .map(|j| {
            let x = grid.x(j);
            let z = psi.values[j];
            let r = z.norm_sqr();
            let flux = d1.values[j] * z.conj();
            let (ur, vr) = (hbar / m * flux.re, hbar / m * flux.im);
            let (u2r, v2r) = if r > 0.0 { (ur * ur / r, vr * vr / r) } else { (0.0, 0.0) };
            [x * r, x * x * r, ur, vr, u2r, v2r, x * vr]
        })
        .collect();
    let sums = terms.iter().fold([0.0; 7], |a, b| std::array::from_fn(|i| a[i] + b[i]));
    let [sx, sxx, su, sv, suu, svv, sxv] = sums.map(|s| s * dx * inv);
    let delta_x = (sxx - sx * sx).max(0.0).sqrt();
    let delta_u = (suu - su * su).max(0.0).sqrt();
    let delta_v = (svv - sv * sv).max(0.0).sqrt();
    let anticomm = 2.0 * m * (sxv - sx * sv);

    let spec = psi.spectrum();
    let (mut w, mut wk, mut wkk) = (0.0, 0.0, 0.0);
    for (z, &k) in spec.iter().zip(grid.wavenumbers()) {
        let p = z.norm_sqr();
        w += p;
        wk += k * p;
        wkk += k * k * p;
    }
    let mean_p = hbar * wk / w;
    let delta_p = hbar * (wkk / w - (wk / w).powi(2)).max(0.0).sqrt();
    let kinetic = hbar * hbar * wkk / w / (2.0 * m);

    let (energy, ehrenfest_gap) = match pot {
        Some(ps) => {
            let (mut ev, mut eg) = (0.0, 0.0);
            for (j, z) in psi.values.iter().enumerate() {
                let r = z.norm_sqr();
                ev += ps.values.values[j] * r;
                eg += ps.gradient.values[j] * r;
            }
            (kinetic + ev * dx * inv, eg * dx * inv - ps.gradient_at(sx))
        }
        None => (kinetic, f64::NAN),
    };
    ObservableRecord {
        t,
        mean_x: sx,
        mean_p,
        delta_x,
        delta_p,
        delta_u,
        delta_v,
        anticomm,
        norm,
        energy,
        ehrenfest_gap,
        boundary_leakage: boundary_leakage(psi),
    }
}

/// Parameters shared by the displacement and scaling operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorParams {
    pub x_cl: f64,
    pub v_cl: f64,
    pub phase0: f64,
    pub sigma: f64,
    pub sigma_dot: f64,
    pub sigma0: f64,
    /// Squeeze parameter `−½ ln(σ/σ₀)`.
    pub f: f64,
    pub units: Units,
}

impl OperatorParams {
    pub fn new(x_cl: f64, v_cl: f64, phase0: f64, sigma: f64, sigma_dot: f64, sigma0: f64, units: Units) -> Result<Self> {
        if !(sigma > 0.0 && sigma0 > 0.0) {
            return Err(Error::param("sigma", "widths must be positive"));
        }
        Ok(Self { x_cl, v_cl, phase0, sigma, sigma_dot, sigma0, f: -0.5 * (sigma / sigma0).ln(), units })
    }

    pub fn from_family(family: &PacketFamily, p: &FamilyPoint) -> Result<Self> {
        Self::new(p.x, p.v, p.s0, p.sigma, p.sigma_dot, family.shape.sigma0, family.units())
    }

    /// Coefficient of the quadratic phase `x²` imprinted by the scaling.
    pub fn chirp(&self) -> f64 {
        self.units.mass * self.sigma_dot / (2.0 * self.units.hbar * self.sigma)
    }
}

/// Smallest node interval outside which each tail holds < 1e-12 of the norm.
fn support(psi: &ComplexField) -> (f64, f64) {
    let total: f64 = psi.values.iter().map(|z| z.norm_sqr()).sum();
    let cut = 1e-12 * total;
    let edge = |iter: &mut dyn Iterator<Item = (usize, &C64)>| {
        let mut acc = 0.0;
        for (j, z) in iter {
            acc += z.norm_sqr();
            if acc > cut {
                return j;
            }
        }
        0
    };
    let a = edge(&mut psi.values.iter().enumerate());
    let b = edge(&mut psi.values.iter().enumerate().rev());
    (psi.grid.x(a), psi.grid.x(b))
}

fn fits(grid: &Grid1D, lo: f64, hi: f64) -> Result<()> {
    if lo >= grid.x_min() && hi <= grid.x_max() - grid.dx() {
        Ok(())
    } else {
        Err(Error::PacketOffGrid { lo, hi })
    }
}

/// `Ψ(x) ↦ e^{iφ₀/ħ} e^{imv_cl x/ħ} Ψ(x − x_cl)`: translate (spectrally),
/// then boost and rephase.
pub fn displace(psi: &ComplexField, p: &OperatorParams) -> Result<ComplexField> {
    let grid = &psi.grid;
    let (lo, hi) = support(psi);
    fits(grid, lo + p.x_cl, hi + p.x_cl)?;
    let mut data = psi.values.clone();
    if p.x_cl != 0.0 {
        grid.fft(&mut data);
        let n = grid.n_points();
        for (j, (z, &k)) in data.iter_mut().zip(grid.wavenumbers()).enumerate() {
            // the Nyquist mode is shifted as a cosine so real input stays real
            *z *= if j == n / 2 { C64::new((k * p.x_cl).cos(), 0.0) } else { C64::from_polar(1.0, -k * p.x_cl) };
        }
        grid.ifft(&mut data);
        // Ψ vanishes off the grid: drop what the periodic shift wrapped around
        let (lo, hi) = (grid.x_min() + p.x_cl, grid.x_max() + p.x_cl);
        for (j, z) in data.iter_mut().enumerate() {
            let x = grid.x(j);
            if x < lo || x >= hi {
                *z = C64::new(0.0, 0.0);
            }
        }
    }
    let Units { hbar, mass: m } = p.units;
    if p.v_cl != 0.0 || p.phase0 != 0.0 {
        data.par_iter_mut().enumerate().for_each(|(j, z)| {
            *z *= C64::from_polar(1.0, (m * p.v_cl * grid.x(j) + p.phase0) / hbar);
        });
    }
    Ok(grid.complex_field(data))
}

/// Band-limited resampling `x ↦ Ψ(q x)`.
pub fn scale_argument(psi: &ComplexField, q: f64) -> ComplexField {
    let grid = &psi.grid;
    let interp = psi.interpolant();
    let (xmin, xmax) = (grid.x_min(), grid.x_max());
    let values = grid
        .nodes()
        .par_iter()
        .map(|&x| {
            let y = q * x;
            if y >= xmin && y < xmax {
                interp.eval(y)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    grid.complex_field(values)
}

/// `Ψ(x) ↦ e^{f} e^{i(mσ̇/2ħσ)x²} Ψ(e^{2f} x)`.
pub fn dynamical_scale(psi: &ComplexField, p: &OperatorParams) -> Result<ComplexField> {
    let grid = &psi.grid;
    let q = (2.0 * p.f).exp();
    let (lo, hi) = support(psi);
    fits(grid, lo / q, hi / q)?;
    let mut out = if p.f == 0.0 { psi.clone() } else { scale_argument(psi, q) };
    let amp = p.f.exp();
    let chirp = p.chirp();
    out.values.par_iter_mut().enumerate().for_each(|(j, z)| {
        let x = grid.x(j);
        *z *= C64::from_polar(amp, chirp * x * x);
    });
    Ok(out)
}

/// Constant-width family member at `t`.
pub fn build_coherent_state(family: &PacketFamily, grid: &Grid1D, t: f64) -> Result<ComplexField> {
    if family.is_squeezed() {
        return Err(Error::param("family", "coherent state requested from a breathing family"));
    }
    family.wavefunction(grid, t)
}

/// Breathing family member at `t`.
pub fn build_squeezed_state(family: &PacketFamily, grid: &Grid1D, t: f64) -> Result<ComplexField> {
    if !family.is_squeezed() {
        return Err(Error::param("family", "squeezed state requested without an envelope"));
    }
    family.wavefunction(grid, t)
}

/// `D(x_cl, v_cl, S₀) · S(f, σ̇) · ψ₀` on `grid`.
pub fn build_via_operators(family: &PacketFamily, grid: &Grid1D, t: f64) -> Result<ComplexField> {
    let p = family.point(t)?;
    let params = OperatorParams::from_family(family, &p)?;
    let seed = family.shape.centered_seed(grid);
    displace(&dynamical_scale(&seed, &params)?, &params)
}
