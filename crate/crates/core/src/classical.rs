//! Classical centre trajectory and width envelope.
//!
//! The centre obeys `m ẍ = −V'(x)`; the envelope obeys
//! `σ̈ = ħ²K²/(4m²σ³) − ⟨ξ V'(x + σξ)⟩_ρ / m`, the average taken over the
//! shape density. Both are integrated with fixed-step RK4 and can be
//! evaluated between samples by quintic Hermite interpolation.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{hermite5, rk4_step};
use crate::potential::{CubicSpline, StaticPotential};
use crate::spectrum::ShapeFunction;
use crate::Units;

/// Relative slack on span checks, in units of the sample spacing.
const SPAN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrajectory {
    pub dt: f64,
    pub samples: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub sigma: f64,
    pub sigma_dot: f64,
    pub sigma_ddot: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum EnvelopeSource {
    Integrated,
    Prescribed(CubicSpline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrajectory {
    pub dt: f64,
    pub samples: Vec<EnvelopePoint>,
    pub k2: f64,
    pub sigma0: f64,
    source: EnvelopeSource,
}

fn locate(t: f64, t0: f64, dt: f64, n: usize) -> Result<(usize, f64)> {
    let end = t0 + dt * (n - 1) as f64;
    let slack = SPAN_SLACK * dt.max(f64::MIN_POSITIVE);
    if !(t >= t0 - slack && t <= end + slack) {
        return Err(Error::TimeOutOfRange { t, start: t0, end });
    }
    if n < 2 {
        return Ok((0, 0.0));
    }
    let k = (((t - t0) / dt).floor().max(0.0) as usize).min(n - 2);
    Ok((k, t - (t0 + k as f64 * dt)))
}

/// Lagrange interpolation through up to six stored samples around interval `k`.
/// Used for second derivatives: the quintic's own curvature divides position
/// roundoff by dt².
fn lagrange_samples(f: impl Fn(usize) -> f64, n: usize, k: usize, s: f64, dt: f64) -> f64 {
    let w = n.min(6);
    let j0 = (k + 1).saturating_sub(w / 2).min(n - w);
    let u = (k - j0) as f64 + s / dt;
    (0..w)
        .map(|i| {
            let li: f64 = (0..w).filter(|&m| m != i).map(|m| (u - m as f64) / (i as f64 - m as f64)).product();
            li * f(j0 + i)
        })
        .sum()
}

impl ClassicalTrajectory {
    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Position, velocity and acceleration at any `t` in the span.
    pub fn at(&self, t: f64) -> Result<TrajectoryPoint> {
        let (k, s) = locate(t, self.start(), self.dt, self.samples.len())?;
        if self.samples.len() < 2 {
            return Ok(TrajectoryPoint { t, ..self.samples[0] });
        }
        let (l, r) = (&self.samples[k], &self.samples[k + 1]);
        let [x, v, _] = hermite5(self.dt, [l.x, l.v, l.a], [r.x, r.v, r.a], s);
        let a = lagrange_samples(|i| self.samples[i].a, self.samples.len(), k, s, self.dt);
        Ok(TrajectoryPoint { t, x, v, a })
    }

    /// Largest relative deviation of ½mv² + V(x) from its initial value.
    pub fn energy_drift(&self, pot: &StaticPotential, units: Units) -> f64 {
        let e = |p: &TrajectoryPoint| 0.5 * units.mass * p.v * p.v + pot.evaluate(p.x);
        let e0 = e(&self.samples[0]);
        self.samples.iter().map(|p| (e(p) - e0).abs()).fold(0.0, f64::max)
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x_cl", "v_cl", "a_cl"])?;
        for p in &self.samples {
            w.write_record(&[p.t, p.x, p.v, p.a].map(fmt))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl EnvelopeTrajectory {
    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn is_prescribed(&self) -> bool {
        matches!(self.source, EnvelopeSource::Prescribed(_))
    }

    pub fn at(&self, t: f64) -> Result<EnvelopePoint> {
        let (k, s) = locate(t, self.start(), self.dt, self.samples.len())?;
        if let EnvelopeSource::Prescribed(spline) = &self.source {
            return Ok(EnvelopePoint {
                t,
                sigma: spline.value(t),
                sigma_dot: spline.derivative(t),
                sigma_ddot: spline.second_derivative(t),
            });
        }
        if self.samples.len() < 2 {
            return Ok(EnvelopePoint { t, ..self.samples[0] });
        }
        let (l, r) = (&self.samples[k], &self.samples[k + 1]);
        let [sigma, sigma_dot, _] =
            hermite5(self.dt, [l.sigma, l.sigma_dot, l.sigma_ddot], [r.sigma, r.sigma_dot, r.sigma_ddot], s);
        let sigma_ddot = lagrange_samples(|i| self.samples[i].sigma_ddot, self.samples.len(), k, s, self.dt);
        Ok(EnvelopePoint { t, sigma, sigma_dot, sigma_ddot })
    }

    /// A constant envelope `σ ≡ σ₀` covering `[start, end]`.
    pub fn constant(shape: &ShapeFunction, dt: f64, start: f64, end: f64) -> Self {
        let n = (((end - start) / dt).round() as usize).max(1) + 1;
        let samples = (0..n)
            .map(|k| EnvelopePoint { t: start + k as f64 * dt, sigma: shape.sigma0, sigma_dot: 0.0, sigma_ddot: 0.0 })
            .collect();
        Self { dt, samples, k2: shape.k2, sigma0: shape.sigma0, source: EnvelopeSource::Integrated }
    }

    /// Envelope following a user schedule `σ(t)` through a natural cubic
    /// spline; samples are stored every `dt` over the table's span.
    pub fn prescribed(times: Vec<f64>, sigmas: Vec<f64>, dt: f64, shape: &ShapeFunction) -> Result<Self> {
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::param("sigma", format!("prescribed widths must be positive, got {s}")));
        }
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let spline = CubicSpline::natural(times, sigmas)?;
        let knots = spline.knots();
        let (start, end) = (knots[0], knots[knots.len() - 1]);
        let n = ((end - start) / dt + SPAN_SLACK).floor() as usize + 1;
        let samples: Vec<EnvelopePoint> = (0..n)
            .map(|k| {
                let t = start + k as f64 * dt;
                EnvelopePoint { t, sigma: spline.value(t), sigma_dot: spline.derivative(t), sigma_ddot: spline.second_derivative(t) }
            })
            .collect();
        if let Some(p) = samples.iter().find(|p| !(p.sigma > 0.0)) {
            return Err(Error::Collapse { t: p.t, sigma: p.sigma });
        }
        Ok(Self { dt, samples, k2: shape.k2, sigma0: shape.sigma0, source: EnvelopeSource::Prescribed(spline) })
    }

    /// Reads a prescribed schedule from a `t, sigma` CSV with header.
    pub fn prescribed_from_csv(path: &Path, dt: f64, shape: &ShapeFunction) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
        let (mut ts, mut ss) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: "expected two numeric columns t, sigma".into(),
                })
            };
            ts.push(parse(0)?);
            ss.push(parse(1)?);
        }
        Self::prescribed(ts, ss, dt, shape)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "sigma", "sigma_dot", "sigma_ddot"])?;
        for p in &self.samples {
            w.write_record(&[p.t, p.sigma, p.sigma_dot, p.sigma_ddot].map(fmt))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Optional bound on the centre position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SafeInterval {
    fn check(&self, t: f64, x: f64) -> Result<()> {
        if x >= self.lo && x <= self.hi {
            Ok(())
        } else {
            Err(Error::TrajectoryEscape { t, x })
        }
    }
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end >= dt) {
        return Err(Error::param("T", format!("must be at least dt, got {t_end}")));
    }
    Ok((t_end / dt - SPAN_SLACK).ceil() as usize)
}

/// RK4 solution of `m ẍ = −V'(x)` sampled every `dt` on `[0, ≥ t_end]`.
pub fn integrate_trajectory(
    pot: &StaticPotential,
    units: Units,
    x0: f64,
    v0: f64,
    dt: f64,
    t_end: f64,
    safe: Option<SafeInterval>,
) -> Result<ClassicalTrajectory> {
    integrate_trajectory_with(&|x| pot.gradient(x), units, x0, v0, dt, t_end, safe)
}

/// As [`integrate_trajectory`] for an arbitrary force law `−gradient(x)`.
pub fn integrate_trajectory_with(
    gradient: &(dyn Fn(f64) -> f64 + Sync),
    units: Units,
    x0: f64,
    v0: f64,
    dt: f64,
    t_end: f64,
    safe: Option<SafeInterval>,
) -> Result<ClassicalTrajectory> {
    let n = step_count(dt, t_end)?;
    let m = units.mass;
    let deriv = |y: &[f64; 2], _t: f64| [y[1], -gradient(y[0]) / m];
    let mut samples = Vec::with_capacity(n + 1);
    let mut y = [x0, v0];
    for k in 0..=n {
        let t = k as f64 * dt;
        if let Some(s) = &safe {
            s.check(t, y[0])?;
        }
        samples.push(TrajectoryPoint { t, x: y[0], v: y[1], a: -gradient(y[0]) / m });
        if k < n {
            y = rk4_step(&y, t, dt, deriv)?;
        }
    }
    Ok(ClassicalTrajectory { dt, samples })
}

/// Guard levels for envelope integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    /// Collapse threshold as a fraction of σ₀.
    pub collapse_fraction: f64,
    /// Largest tolerated |ξV'ρ| at the window edge relative to its peak.
    pub edge_tolerance: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { collapse_fraction: 1e-3, edge_tolerance: 1e-4 }
    }
}

/// Right-hand side of the envelope equation.
pub struct EnvelopeForce<'a> {
    gradient: &'a (dyn Fn(f64) -> f64 + Sync),
    nodes: Vec<(f64, f64)>,
    pressure: f64,
    mass: f64,
    edge_tolerance: f64,
}

impl<'a> EnvelopeForce<'a> {
    pub fn new(gradient: &'a (dyn Fn(f64) -> f64 + Sync), shape: &ShapeFunction, units: Units, opts: EnvelopeOptions) -> Self {
        let (hbar, m) = (units.hbar, units.mass);
        Self {
            gradient,
            nodes: shape.quadrature_nodes(),
            pressure: hbar * hbar * shape.k2 / (4.0 * m * m),
            mass: m,
            edge_tolerance: opts.edge_tolerance,
        }
    }

    /// ⟨ξ V'(x + σξ)⟩ over the shape density.
    pub fn mean_force_moment(&self, x: f64, sigma: f64) -> f64 {
        self.nodes.iter().map(|&(xi, w)| xi * (self.gradient)(x + sigma * xi) * w).sum()
    }

    fn checked_moment(&self, x: f64, sigma: f64) -> Result<f64> {
        let mut peak = 0.0f64;
        let mut total = 0.0;
        for &(xi, w) in &self.nodes {
            let term = xi * (self.gradient)(x + sigma * xi) * w;
            peak = peak.max(term.abs());
            total += term;
        }
        let edge = match (self.nodes.first(), self.nodes.last()) {
            (Some(&(a, wa)), Some(&(b, wb))) => {
                ((a * (self.gradient)(x + sigma * a) * wa).abs()).max((b * (self.gradient)(x + sigma * b) * wb).abs())
            }
            _ => 0.0,
        };
        if peak > 0.0 && edge > self.edge_tolerance * peak {
            return Err(Error::ExpectationWindow { weight: edge / peak });
        }
        Ok(total)
    }

    /// σ̈ at centre `x` and width `sigma`.
    pub fn acceleration(&self, x: f64, sigma: f64) -> f64 {
        self.pressure / sigma.powi(3) - self.mean_force_moment(x, sigma) / self.mass
    }
}

/// Integrates the envelope alongside the centre, on the trajectory's own
/// time lattice.
pub fn integrate_envelope(
    pot: &StaticPotential,
    shape: &ShapeFunction,
    trajectory: &ClassicalTrajectory,
    sigma_init: f64,
    sigma_dot_init: f64,
) -> Result<EnvelopeTrajectory> {
    integrate_envelope_with(&|x| pot.gradient(x), shape, trajectory, sigma_init, sigma_dot_init, EnvelopeOptions::default())
}

/// As [`integrate_envelope`] for an arbitrary force law.
pub fn integrate_envelope_with(
    gradient: &(dyn Fn(f64) -> f64 + Sync),
    shape: &ShapeFunction,
    trajectory: &ClassicalTrajectory,
    sigma_init: f64,
    sigma_dot_init: f64,
    opts: EnvelopeOptions,
) -> Result<EnvelopeTrajectory> {
    if !(sigma_init > 0.0 && sigma_init.is_finite()) {
        return Err(Error::param("sigma_init", format!("must be positive, got {sigma_init}")));
    }
    let units = shape.units;
    let m = units.mass;
    let force = EnvelopeForce::new(gradient, shape, units, opts);
    let sigma_min = opts.collapse_fraction * shape.sigma0;
    let dt = trajectory.dt;
    let first = trajectory.samples[0];
    force.checked_moment(first.x, sigma_init)?;

    // x and v are recomputed here with the same arithmetic as the stored
    // trajectory, so the two agree to the last bit
    let deriv = |y: &[f64; 4], _t: f64| [y[1], -gradient(y[0]) / m, y[3], force.acceleration(y[0], y[2])];
    let mut y = [first.x, first.v, sigma_init, sigma_dot_init];
    let n = trajectory.samples.len();
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = trajectory.samples[k].t;
        if !(y[2] > sigma_min) {
            return Err(Error::Collapse { t, sigma: y[2] });
        }
        samples.push(EnvelopePoint { t, sigma: y[2], sigma_dot: y[3], sigma_ddot: force.acceleration(y[0], y[2]) });
        if k + 1 < n {
            y = rk4_step(&y, t, dt, deriv)?;
            if k % 64 == 0 {
                force.checked_moment(y[0], y[2])?;
            }
        }
    }
    Ok(EnvelopeTrajectory { dt, samples, k2: shape.k2, sigma0: shape.sigma0, source: EnvelopeSource::Integrated })
}
