//! Shape-preserving packet families: the ground-state seed carried along a
//! classical trajectory, optionally breathing with an envelope σ(t).
//!
//! ```text
//! Ψ(x,t) = √(σ₀/σ) ψ₀c(σ₀(x − x_cl)/σ) · exp{i[m v_cl x + m σ̇ (x − x_cl)²/(2σ) + S₀(t)]/ħ}
//! ```
//!
//! where ψ₀c is the ground state translated so its mean sits at the origin.
//! The phase origin S₀ obeys
//! `Ṡ₀ = (σ₀/σ)²(V(c₀) − E₀) − m a_cl x_cl − ½ m v_cl²`, which makes the
//! family an exact solution under the zero-at-center control potential.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{ClassicalTrajectory, EnvelopeTrajectory};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid1D};
use crate::potential::StaticPotential;
use crate::spectrum::ShapeFunction;
use crate::Units;

// three-point Gauss–Legendre on [0, 1]
const GL_NODES: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GL_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Family parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub a: f64,
    pub sigma: f64,
    pub sigma_dot: f64,
    pub sigma_ddot: f64,
    pub s0: f64,
}

#[derive(Debug, Clone)]
pub struct PacketFamily {
    pub base: StaticPotential,
    pub shape: Arc<ShapeFunction>,
    pub trajectory: Arc<ClassicalTrajectory>,
    pub envelope: Option<Arc<EnvelopeTrajectory>>,
    start: f64,
    end: f64,
    phase_dt: f64,
    phase: Vec<f64>,
}

impl PacketFamily {
    /// Constant-width family (σ ≡ σ₀).
    pub fn coherent(base: StaticPotential, shape: Arc<ShapeFunction>, trajectory: Arc<ClassicalTrajectory>) -> Result<Self> {
        Self::build(base, shape, trajectory, None)
    }

    /// Breathing family following `envelope`.
    pub fn squeezed(
        base: StaticPotential,
        shape: Arc<ShapeFunction>,
        trajectory: Arc<ClassicalTrajectory>,
        envelope: Arc<EnvelopeTrajectory>,
    ) -> Result<Self> {
        Self::build(base, shape, trajectory, Some(envelope))
    }

    fn build(
        base: StaticPotential,
        shape: Arc<ShapeFunction>,
        trajectory: Arc<ClassicalTrajectory>,
        envelope: Option<Arc<EnvelopeTrajectory>>,
    ) -> Result<Self> {
        let (mut start, mut end) = (trajectory.start(), trajectory.end());
        if let Some(env) = &envelope {
            start = start.max(env.start());
            end = end.min(env.end());
        }
        if !(end > start) {
            return Err(Error::param("envelope", "trajectory and envelope spans do not overlap"));
        }
        let mut family = Self { base, shape, trajectory, envelope, start, end, phase_dt: 0.0, phase: vec![0.0] };
        family.phase_dt = family.trajectory.dt;
        let n = ((end - start) / family.phase_dt + 1e-9).floor() as usize;
        let mut phase = Vec::with_capacity(n + 1);
        phase.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            acc += family.phase_increment(start + k as f64 * family.phase_dt, family.phase_dt)?;
            phase.push(acc);
        }
        family.phase = phase;
        Ok(family)
    }

    pub fn units(&self) -> Units {
        self.shape.units
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn is_squeezed(&self) -> bool {
        self.envelope.is_some()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-9 * self.trajectory.dt;
        if t >= self.start - slack && t <= self.end + slack {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, start: self.start, end: self.end })
        }
    }

    /// Kinematic parameters without the phase origin.
    fn kinematics(&self, t: f64) -> Result<FamilyPoint> {
        self.check_time(t)?;
        let c = self.trajectory.at(t)?;
        let (sigma, sigma_dot, sigma_ddot) = match &self.envelope {
            Some(env) => {
                let e = env.at(t)?;
                (e.sigma, e.sigma_dot, e.sigma_ddot)
            }
            None => (self.shape.sigma0, 0.0, 0.0),
        };
        if !(sigma > 0.0) {
            return Err(Error::Collapse { t, sigma });
        }
        Ok(FamilyPoint { t, x: c.x, v: c.v, a: c.a, sigma, sigma_dot, sigma_ddot, s0: 0.0 })
    }

    /// Rate of the phase origin.
    pub fn phase_rate(&self, p: &FamilyPoint) -> f64 {
        let m = self.units().mass;
        let k = self.shape.sigma0 / p.sigma;
        k * k * (self.base.evaluate(self.shape.center) - self.shape.energy) - m * p.a * p.x - 0.5 * m * p.v * p.v
    }

    fn phase_increment(&self, t: f64, h: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (s, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let p = self.kinematics(t + s * h)?;
            sum += w * self.phase_rate(&p);
        }
        Ok(sum * h)
    }

    /// S₀(t), with S₀ = 0 at the start of the span.
    pub fn phase_origin(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let k = (((t - self.start) / self.phase_dt).floor().max(0.0) as usize).min(self.phase.len() - 1);
        let tk = self.start + k as f64 * self.phase_dt;
        let rest = t - tk;
        if rest.abs() < 1e-15 * self.phase_dt {
            return Ok(self.phase[k]);
        }
        Ok(self.phase[k] + self.phase_increment(tk, rest)?)
    }

    pub fn point(&self, t: f64) -> Result<FamilyPoint> {
        let mut p = self.kinematics(t)?;
        p.s0 = self.phase_origin(t)?;
        Ok(p)
    }

    /// Interval the packet occupies: the trusted ξ-window mapped to x.
    pub fn footprint(&self, p: &FamilyPoint) -> (f64, f64) {
        let w = self.shape.options.xi_window;
        (p.x - w * p.sigma, p.x + w * p.sigma)
    }

    /// The family member at time `t`, sampled on `grid`.
    pub fn wavefunction(&self, grid: &Grid1D, t: f64) -> Result<ComplexField> {
        let p = self.point(t)?;
        self.wavefunction_at(grid, &p)
    }

    /// Family member for explicit parameters.
    pub fn wavefunction_at(&self, grid: &Grid1D, p: &FamilyPoint) -> Result<ComplexField> {
        let (lo, hi) = self.footprint(p);
        if lo < grid.x_min() || hi > grid.x_max() {
            return Err(Error::PacketOffGrid { lo, hi });
        }
        let Units { hbar, mass: m } = self.units();
        let k = self.shape.sigma0 / p.sigma;
        let amp = k.sqrt();
        let seed_grid = self.shape.grid();
        let (smin, smax) = (seed_grid.x_min() - self.shape.center, seed_grid.x_max() - self.shape.center);
        let nodes = grid.nodes();
        let values: Vec<C64> = nodes
            .par_iter()
            .map(|&x| {
                let y = x - p.x;
                let z = k * y;
                let a = if z >= smin && z < smax { amp * self.shape.centered_amplitude(z) } else { 0.0 };
                let phase = (m * p.v * x + m * p.sigma_dot * y * y / (2.0 * p.sigma) + p.s0) / hbar;
                C64::from_polar(a, phase)
            })
            .collect();
        Ok(grid.complex_field(values))
    }
}
