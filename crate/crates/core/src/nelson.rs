//! Nelson diffusion sampled alongside a Schrödinger run:
//! `dq = (v + u)(q, t) dt + √(ħ/m) dW`.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::PotentialDrive;
use crate::error::{Error, Result};
use crate::grid::{spectral_derivative, ComplexField};
use crate::propagation::{tdse_propagate_with, PropagationOptions, PropagationRun};
use crate::rng::{NormalSource, RngStream};
use crate::states::TRUST_FLOOR;
use crate::Units;

/// Particles per random stream. Fixed so that results do not depend on the
/// thread count.
pub const CHUNK: usize = 4096;

/// Forward drift `v₊ = v + u` on the grid, trusted between `lo` and `hi`.
#[derive(Debug, Clone)]
pub struct DriftField {
    x_min: f64,
    dx: f64,
    values: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl DriftField {
    pub fn from_state(psi: &ComplexField, units: Units) -> Result<Self> {
        let grid = &psi.grid;
        let rho = psi.density();
        let (Some(lo), Some(hi)) = (rho.values.iter().position(|&r| r > TRUST_FLOOR), rho.values.iter().rposition(|&r| r > TRUST_FLOOR))
        else {
            return Err(Error::DensityUnderflow { xi: 0.0 });
        };
        let d = spectral_derivative(psi, 1);
        let c = units.hbar / units.mass;
        let mut values = vec![0.0; grid.n_points()];
        for j in lo..=hi {
            let r = d.values[j] / psi.values[j];
            values[j] = c * (r.re + r.im);
        }
        Ok(Self { x_min: grid.x_min(), dx: grid.dx(), values, lo, hi })
    }

    /// Pure drift field for tests and diagnostics.
    pub fn uniform(grid: &crate::grid::Grid1D, v: f64) -> Self {
        Self { x_min: grid.x_min(), dx: grid.dx(), values: vec![v; grid.n_points()], lo: 0, hi: grid.n_points() - 1 }
    }

    fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// Linear interpolation; outside the trusted nodes the nearest trusted
    /// value, with `true` flagging the clamp.
    pub fn eval(&self, q: f64) -> Result<(f64, bool)> {
        let (a, b) = (self.x(self.lo), self.x(self.hi));
        if q < a || q > b {
            if q < a - 2.0 * self.dx || q > b + 2.0 * self.dx || !q.is_finite() {
                return Err(Error::ParticleEscape { x: q });
            }
            return Ok((if q < a { self.values[self.lo] } else { self.values[self.hi] }, true));
        }
        let s = (q - self.x_min) / self.dx;
        let j = (s.floor() as usize).clamp(self.lo, self.hi.saturating_sub(1).max(self.lo));
        if j == self.hi {
            return Ok((self.values[j], false));
        }
        let w = s - j as f64;
        Ok(((1.0 - w) * self.values[j] + w * self.values[j + 1], false))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub t: f64,
    pub positions: Vec<f64>,
    pub seed: RngStream,
    pub n_particles: usize,
    /// Cumulative count of drift evaluations clamped outside the trusted window.
    pub flagged: u64,
    /// Steps taken so far; step k of chunk c draws from `seed.child(k + 1).child(c)`.
    pub steps: u64,
    noise: bool,
}

impl EnsembleState {
    pub fn new(t: f64, positions: Vec<f64>, seed: RngStream) -> Result<Self> {
        if positions.iter().any(|q| !q.is_finite()) {
            return Err(Error::param("positions", "must be finite"));
        }
        Ok(Self { t, n_particles: positions.len(), positions, seed, flagged: 0, steps: 0, noise: true })
    }

    fn stream(&self, step: u64, chunk: usize) -> NormalSource {
        self.seed.child(step).child(chunk as u64).normals()
    }

    /// Inverse-CDF sample of `|Ψ|²` (uniforms from the step-0 streams).
    pub fn sample_from(psi: &ComplexField, t: f64, n_particles: usize, seed: RngStream) -> Result<Self> {
        let grid = &psi.grid;
        let rho = psi.density().values;
        let mut cdf = Vec::with_capacity(rho.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in rho.windows(2) {
            acc += 0.5 * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::DensityUnderflow { xi: 0.0 });
        }
        let mut ens = Self::new(t, vec![0.0; n_particles], seed)?;
        let (x0, dx) = (grid.x_min(), grid.dx());
        let streams: Vec<NormalSource> = (0..n_particles.div_ceil(CHUNK)).map(|c| ens.stream(0, c)).collect();
        ens.positions.par_chunks_mut(CHUNK).zip(streams).for_each(|(qs, mut src)| {
            for q in qs {
                let target = src.next_uniform() * acc;
                let j = cdf.partition_point(|&c| c <= target).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[j - 1], cdf[j]);
                let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
                *q = x0 + (j as f64 - 1.0 + w) * dx;
            }
        });
        Ok(ens)
    }

    /// Turns the Wiener increment off (deterministic transport).
    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }
}

/// One Euler–Maruyama step under the drift of `psi`.
pub fn nelson_step(ens: EnsembleState, psi: &ComplexField, dt: f64, units: Units) -> Result<EnsembleState> {
    let drift = DriftField::from_state(psi, units)?;
    nelson_step_with(ens, &drift, dt, units)
}

pub fn nelson_step_with(mut ens: EnsembleState, drift: &DriftField, dt: f64, units: Units) -> Result<EnsembleState> {
    if !(dt >= 0.0) {
        return Err(Error::param("dt", "must be non-negative"));
    }
    if dt == 0.0 {
        return Ok(ens);
    }
    let amp = if ens.noise { (units.hbar / units.mass * dt).sqrt() } else { 0.0 };
    let noise = ens.noise;
    let step = ens.steps + 1;
    let streams: Vec<NormalSource> = (0..ens.n_particles.div_ceil(CHUNK)).map(|c| ens.stream(step, c)).collect();
    let flagged = ens
        .positions
        .par_chunks_mut(CHUNK)
        .zip(streams)
        .map(|(qs, mut src)| -> Result<u64> {
            let mut dw = vec![0.0; qs.len()];
            if noise {
                src.fill_normals(&mut dw);
            }
            let mut clamped = 0;
            for (q, w) in qs.iter_mut().zip(&dw) {
                let (b, c) = drift.eval(*q)?;
                *q += b * dt + amp * w;
                clamped += c as u64;
            }
            Ok(clamped)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    ens.flagged += flagged;
    ens.steps = step;
    ens.t += dt;
    Ok(ens)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub t: f64,
    pub emp_mean: f64,
    pub emp_std: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub l1_distance: f64,
    pub quantum_mean: f64,
    pub quantum_std: f64,
    pub flagged: u64,
}

/// Histogram over `⟨x⟩ ± 6Δx` against the bin integrals of `|Ψ|²`; the end
/// bins absorb the tails on both sides.
pub fn ensemble_stats(ens: &EnsembleState, psi: &ComplexField, bins: usize) -> Result<EnsembleStats> {
    if bins == 0 {
        return Err(Error::param("bins", "must be at least 1"));
    }
    let grid = &psi.grid;
    let rho = psi.density().values;
    let dx = grid.dx();
    let norm: f64 = rho.iter().sum::<f64>() * dx;
    let mean = rho.iter().enumerate().map(|(j, r)| grid.x(j) * r).sum::<f64>() * dx / norm;
    let var = rho.iter().enumerate().map(|(j, r)| (grid.x(j) - mean).powi(2) * r).sum::<f64>() * dx / norm;
    let sd = var.sqrt();
    let (lo, hi) = (mean - 6.0 * sd, mean + 6.0 * sd);
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();

    // cumulative mass at the edges: trapezoid cells, linear within a cell
    let mut cdf = vec![0.0; rho.len()];
    for j in 1..rho.len() {
        cdf[j] = cdf[j - 1] + 0.5 * (rho[j - 1] + rho[j]) * dx;
    }
    let total = cdf[rho.len() - 1];
    let mass_below = |x: f64| {
        let s = (x - grid.x_min()) / dx;
        if s <= 0.0 {
            return 0.0;
        }
        let j = s.floor() as usize;
        if j >= rho.len() - 1 {
            return total;
        }
        let w = s - j as f64;
        cdf[j] + w * (cdf[j + 1] - cdf[j])
    };
    let mut probs: Vec<f64> = (0..bins).map(|b| (mass_below(bin_edges[b + 1]) - mass_below(bin_edges[b])) / total).collect();
    probs[0] += mass_below(lo) / total;
    probs[bins - 1] += (total - mass_below(hi)) / total;

    let mut counts = vec![0u64; bins];
    for &q in &ens.positions {
        let b = ((q - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[b] += 1;
    }
    let n = ens.n_particles as f64;
    let l1_distance = counts.iter().zip(&probs).map(|(&c, &p)| (c as f64 / n - p).abs()).sum();
    let emp_mean = ens.positions.iter().sum::<f64>() / n;
    let emp_std = (ens.positions.iter().map(|q| (q - emp_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EnsembleStats { t: ens.t, emp_mean, emp_std, bin_edges, counts, l1_distance, quantum_mean: mean, quantum_std: sd, flagged: ens.flagged })
}

pub fn write_ensemble_csv(stats: &[EnsembleStats], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "emp_mean", "emp_std", "l1_distance"])?;
    for s in stats {
        w.write_record([s.t, s.emp_mean, s.emp_std, s.l1_distance].map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct NelsonOptions {
    pub n_particles: usize,
    pub seed: RngStream,
    pub bins: usize,
}

/// Runs the Schrödinger propagation and steps the ensemble with the drift of
/// each lattice state; statistics at every sampled step.
#[allow(clippy::too_many_arguments)]
pub fn nelson_run(
    psi0: &ComplexField,
    drive: &dyn PotentialDrive,
    units: Units,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
    prop: &PropagationOptions,
    opts: &NelsonOptions,
) -> Result<(PropagationRun, Vec<EnsembleStats>)> {
    nelson_run_with(psi0, drive, units, dt, n_steps, sample_every, prop, opts, &mut |_, _, _| Ok(()))
}

/// As [`nelson_run`], forwarding every lattice state to `extra` as well.
#[allow(clippy::too_many_arguments)]
pub fn nelson_run_with(
    psi0: &ComplexField,
    drive: &dyn PotentialDrive,
    units: Units,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
    prop: &PropagationOptions,
    opts: &NelsonOptions,
    extra: &mut dyn FnMut(usize, f64, &ComplexField) -> Result<()>,
) -> Result<(PropagationRun, Vec<EnsembleStats>)> {
    if opts.n_particles < 1000 {
        return Err(Error::param("n_particles", "at least 1000 particles are required"));
    }
    let mut ens = Some(EnsembleState::sample_from(psi0, prop.t0, opts.n_particles, opts.seed)?);
    let mut stats = Vec::new();
    let mut hook = |k: usize, t: f64, psi: &ComplexField| -> Result<()> {
        extra(k, t, psi)?;
        let mut e = ens.take().expect("ensemble present between steps");
        // keep the clock on the lattice rather than accumulating dt
        e.t = t;
        if k % sample_every == 0 || k == n_steps {
            stats.push(ensemble_stats(&e, psi, opts.bins)?);
        }
        if k < n_steps {
            e = nelson_step(e, psi, dt, units)?;
        }
        ens = Some(e);
        Ok(())
    };
    let run = tdse_propagate_with(psi0, drive, units, dt, n_steps, sample_every, prop, &mut hook)?;
    Ok((run, stats))
}
