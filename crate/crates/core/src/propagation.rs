//! Split-operator (Strang) propagation of the time-dependent Schrödinger
//! equation on a periodic grid.

use std::path::Path;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::control::PotentialDrive;
use crate::error::{Error, Result};
use crate::grid::{boundary_leakage, ComplexField};
use crate::states::{observables, write_observables_csv, ObservableRecord};
use crate::Units;

#[derive(Debug, Clone, Copy)]
pub struct PropagationOptions {
    pub t0: f64,
    pub leakage_bound: f64,
    pub norm_bound: f64,
    /// Relative spectral power below which a mode counts as empty.
    pub band_floor: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { t0: 0.0, leakage_bound: 1e-8, norm_bound: 1e-9, band_floor: 1e-20 }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationRun {
    pub dt: f64,
    pub n_steps: usize,
    pub sample_every: usize,
    pub t0: f64,
    pub potential: String,
    pub units: Units,
    pub records: Vec<ObservableRecord>,
    pub final_state: ComplexField,
}

impl PropagationRun {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.n_steps as f64 * self.dt
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_observables_csv(&self.records, path)
    }

    /// Largest |norm − norm(0)| over the recorded samples.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.records.first().map_or(1.0, |r| r.norm);
        self.records.iter().map(|r| (r.norm - n0).abs()).fold(0.0, f64::max)
    }
}

/// Per-step kinetic phase at the largest populated wavenumber.
pub fn populated_kinetic_phase(psi: &ComplexField, units: Units, dt: f64, floor: f64) -> f64 {
    let spec = psi.spectrum();
    let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    let kmax = spec
        .iter()
        .zip(psi.grid.wavenumbers())
        .filter(|(z, _)| z.norm_sqr() > floor * total)
        .map(|(_, k)| k.abs())
        .fold(0.0, f64::max);
    units.hbar * kmax * kmax * dt / (2.0 * units.mass)
}

/// Propagates `psi0` for `n_steps` steps of `dt`, recording observables
/// every `sample_every` steps and after the last step.
pub fn tdse_propagate(
    psi0: &ComplexField,
    drive: &dyn PotentialDrive,
    units: Units,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
    opts: &PropagationOptions,
) -> Result<PropagationRun> {
    tdse_propagate_with(psi0, drive, units, dt, n_steps, sample_every, opts, &mut |_, _, _| Ok(()))
}

/// As [`tdse_propagate`]; `hook(k, t_k, Ψ_k)` sees every lattice state,
/// k = 0..=n_steps, before the step out of it is taken.
#[allow(clippy::too_many_arguments)]
pub fn tdse_propagate_with(
    psi0: &ComplexField,
    drive: &dyn PotentialDrive,
    units: Units,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
    opts: &PropagationOptions,
    hook: &mut dyn FnMut(usize, f64, &ComplexField) -> Result<()>,
) -> Result<PropagationRun> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "time step must be positive"));
    }
    if sample_every == 0 {
        return Err(Error::param("sample_every", "must be at least 1"));
    }
    let grid = psi0.grid.clone();
    let t0 = opts.t0;
    let t_end = t0 + n_steps as f64 * dt;
    if let Some((a, b)) = drive.span() {
        let slack = 1e-9 * dt;
        if t0 < a - slack || t_end > b + slack {
            return Err(Error::TimeOutOfRange { t: if t0 < a - slack { t0 } else { t_end }, start: a, end: b });
        }
    }
    let leak = boundary_leakage(psi0);
    if leak > opts.leakage_bound {
        return Err(Error::BoundaryLeakage { leakage: leak, bound: opts.leakage_bound });
    }
    let phase = populated_kinetic_phase(psi0, units, dt, opts.band_floor);
    if phase >= std::f64::consts::PI {
        return Err(Error::Aliasing { dt, phase });
    }
    let Units { hbar, mass: m } = units;
    let kinetic: Vec<C64> = grid.wavenumbers().iter().map(|&k| C64::from_polar(1.0, -hbar * k * k * dt / (2.0 * m))).collect();
    let static_half = if drive.span().is_none() { Some(half_kick(&drive.values_at(&grid, t0)?.values, hbar, dt)) } else { None };

    let mut psi = psi0.clone();
    let norm0 = psi.norm_sqr();
    let mut records = Vec::with_capacity(n_steps / sample_every + 2);
    let mut record = |k: usize, psi: &ComplexField| -> Result<()> {
        let t = t0 + k as f64 * dt;
        let sample = drive.sample_at(&grid, t)?;
        let rec = observables(psi, Some(&sample), t, units);
        if rec.boundary_leakage > opts.leakage_bound {
            return Err(Error::BoundaryLeakage { leakage: rec.boundary_leakage, bound: opts.leakage_bound });
        }
        let drift = (rec.norm - norm0).abs();
        if drift > opts.norm_bound {
            return Err(Error::NormDrift { drift, bound: opts.norm_bound });
        }
        records.push(rec);
        Ok(())
    };

    for k in 0..n_steps {
        let t = t0 + k as f64 * dt;
        if k % sample_every == 0 {
            record(k, &psi)?;
        }
        hook(k, t, &psi)?;
        let owned;
        let half = match &static_half {
            Some(h) => h,
            None => {
                owned = half_kick(&drive.values_at(&grid, t + 0.5 * dt)?.values, hbar, dt);
                &owned
            }
        };
        strang_step(&mut psi.values, half, &kinetic, &grid);
    }
    record(n_steps, &psi)?;
    hook(n_steps, t_end, &psi)?;
    if boundary_leakage(&psi) > opts.leakage_bound {
        return Err(Error::BoundaryLeakage { leakage: boundary_leakage(&psi), bound: opts.leakage_bound });
    }
    Ok(PropagationRun { dt, n_steps, sample_every, t0, potential: drive.label(), units, records, final_state: psi })
}

fn half_kick(v: &[f64], hbar: f64, dt: f64) -> Vec<C64> {
    v.par_iter().map(|&v| C64::from_polar(1.0, -v * dt / (2.0 * hbar))).collect()
}

fn strang_step(psi: &mut [C64], half: &[C64], kinetic: &[C64], grid: &crate::grid::Grid1D) {
    psi.par_iter_mut().zip(half).for_each(|(z, h)| *z *= h);
    grid.fft(psi);
    psi.par_iter_mut().zip(kinetic).for_each(|(z, k)| *z *= k);
    grid.ifft(psi);
    psi.par_iter_mut().zip(half).for_each(|(z, h)| *z *= h);
}
