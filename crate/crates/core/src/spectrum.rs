//! Ground state of a static potential and the adimensional shape data that
//! seeds every controlled packet.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{boundary_leakage, spectral_derivative, ComplexField, Grid1D, RealField, SpectralInterpolant};
use crate::potential::StaticPotential;
use crate::Units;

/// Imaginary-time solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GroundStateOptions {
    pub dtau: f64,
    /// Bound on the energy change per imaginary-time step.
    pub tol: f64,
    /// Bound on the residual ‖(H − E)ψ‖ estimated from the step change.
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub leakage_bound: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self { dtau: 1e-3, tol: 1e-13, residual_tol: 1e-9, max_iterations: 400_000, leakage_bound: 1e-8 }
    }
}

/// Converged, normalized, nodeless ground state.
#[derive(Debug, Clone)]
pub struct StationaryState {
    pub psi0: ComplexField,
    pub energy: f64,
    pub sigma0: f64,
    pub mean_x: f64,
    pub norm_check: f64,
    pub iterations: usize,
    pub units: Units,
}

/// ⟨ψ|T + V|ψ⟩ with the kinetic part taken in Fourier space.
pub fn energy_expectation(psi: &ComplexField, potential: &RealField, units: Units) -> f64 {
    let grid = &psi.grid;
    let spec = psi.spectrum();
    let n = grid.n_points() as f64;
    let kinetic: f64 = spec
        .iter()
        .zip(grid.wavenumbers())
        .map(|(z, k)| z.norm_sqr() * k * k)
        .sum::<f64>()
        * units.hbar
        * units.hbar
        / (2.0 * units.mass)
        * grid.dx()
        / n;
    let pot: f64 = psi.values.iter().zip(&potential.values).map(|(z, v)| z.norm_sqr() * v).sum::<f64>() * grid.dx();
    kinetic + pot
}

/// Imaginary-time propagation to the ground state.
///
/// Each step applies the fourth-order forward splitting
/// `e^{-τV/6} e^{-τT/2} e^{-2τṼ/3} e^{-τT/2} e^{-τV/6}` with
/// `Ṽ = V + τ²|V'|²/(48m)`, whose fixed point is biased only at O(τ⁴).
pub fn ground_state(
    pot: &StaticPotential,
    grid: &Grid1D,
    units: Units,
    opts: &GroundStateOptions,
) -> Result<StationaryState> {
    if !(opts.dtau > 0.0) {
        return Err(Error::param("dtau", "must be positive"));
    }
    let (hbar, m, dtau) = (units.hbar, units.mass, opts.dtau);
    let sample = pot.sample(grid);
    let v = &sample.values.values;
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if !vmin.is_finite() {
        return Err(Error::param("potential", "not finite on the grid"));
    }
    let outer: Vec<f64> = v.iter().map(|&v| (-(v - vmin) * dtau / (6.0 * hbar)).exp()).collect();
    let middle: Vec<f64> = v
        .iter()
        .zip(&sample.gradient.values)
        .map(|(&v, &g)| {
            let corrected = v - vmin + dtau * dtau * g * g / (48.0 * m);
            (-2.0 * corrected * dtau / (3.0 * hbar)).exp()
        })
        .collect();
    let kinetic: Vec<f64> = grid
        .wavenumbers()
        .iter()
        .map(|k| (-hbar * k * k * dtau / (4.0 * m)).exp())
        .collect();

    let mut psi = initial_guess(grid, v, vmin);
    let mut buf = vec![C64::new(0.0, 0.0); grid.n_points()];
    let mut energy = energy_expectation(&psi, &sample.values, units);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    loop {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence { iterations, last_change });
        }
        buf.copy_from_slice(&psi.values);
        let apply = |data: &mut [C64], factors: &[f64]| data.iter_mut().zip(factors).for_each(|(z, f)| *z *= f);
        apply(&mut buf, &outer);
        grid.fft(&mut buf);
        apply(&mut buf, &kinetic);
        grid.ifft(&mut buf);
        apply(&mut buf, &middle);
        grid.fft(&mut buf);
        apply(&mut buf, &kinetic);
        grid.ifft(&mut buf);
        apply(&mut buf, &outer);
        let next = grid.complex_field(buf.clone()).normalized();
        let step_change = next.l2_distance(&psi);
        psi = next;
        iterations += 1;

        let e = energy_expectation(&psi, &sample.values, units);
        last_change = (e - energy).abs();
        energy = e;
        if last_change < opts.tol && step_change / dtau * hbar < opts.residual_tol {
            break;
        }
    }

    let leakage = boundary_leakage(&psi);
    if leakage > opts.leakage_bound {
        return Err(Error::BoundaryLeakage { leakage, bound: opts.leakage_bound });
    }
    // real-positive representative
    let peak = psi.values.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
    let phase = if peak.norm() > 0.0 { peak.conj() / peak.norm() } else { C64::new(1.0, 0.0) };
    psi.values.iter_mut().for_each(|z| *z = C64::new((*z * phase).re, 0.0));
    let amp_floor = 1e-8 * peak.norm();
    if let Some(j) = psi.values.iter().position(|z| z.re < -amp_floor) {
        return Err(Error::NodeDetected { x: grid.x(j) });
    }
    psi.values.iter_mut().for_each(|z| z.re = z.re.max(0.0));
    psi.normalize();

    let rho = psi.density();
    let mean_x: f64 = rho.values.iter().enumerate().map(|(j, r)| grid.x(j) * r).sum::<f64>() * grid.dx();
    let var: f64 = rho.values.iter().enumerate().map(|(j, r)| (grid.x(j) - mean_x).powi(2) * r).sum::<f64>() * grid.dx();
    let energy = energy_expectation(&psi, &sample.values, units);
    Ok(StationaryState { norm_check: psi.norm(), psi0: psi, energy, sigma0: var.sqrt(), mean_x, iterations, units })
}

fn initial_guess(grid: &Grid1D, v: &[f64], vmin: f64) -> ComplexField {
    // Gaussian at the Boltzmann-weighted centre of the well
    let weights: Vec<f64> = v.iter().map(|&v| (-(v - vmin)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let centre = weights.iter().enumerate().map(|(j, w)| grid.x(j) * w).sum::<f64>() / total;
    grid.sample_complex(|x| C64::new((-(x - centre) * (x - centre) / 2.0).exp(), 0.0)).normalized()
}

/// Lowest `k` eigenpairs of the three-point finite-difference Hamiltonian
/// (Dirichlet ends), energies ascending, eigenvectors unit-normalized with a
/// positive first lobe.
pub fn eigensolve_fd(pot: &StaticPotential, grid: &Grid1D, units: Units, k: usize) -> Result<Vec<(f64, RealField)>> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let n = grid.n_points();
    let dx = grid.dx();
    let off = -units.hbar * units.hbar / (2.0 * units.mass * dx * dx);
    let diag: Vec<f64> = (0..n).map(|j| -2.0 * off + pot.evaluate(grid.x(j))).collect();
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs();
    let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs();

    let count_below = |lambda: f64| -> usize {
        // Sturm count via the LDLᵀ pivots
        let mut count = 0;
        let mut d = 1.0;
        for (i, &a) in diag.iter().enumerate() {
            d = if i == 0 { a - lambda } else { a - lambda - off * off / d };
            if d == 0.0 {
                d = -f64::EPSILON * (a.abs() + lambda.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };

    let mut out = Vec::with_capacity(k);
    for idx in 0..k.min(n) {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            if count_below(mid) > idx {
                b = mid;
            } else {
                a = mid;
            }
        }
        let lambda = 0.5 * (a + b);
        let vec = inverse_iteration(&diag, off, lambda, idx);
        let norm = (vec.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
        let first = vec.iter().cloned().find(|v| v.abs() > 1e-6 * norm).unwrap_or(1.0);
        let sign = first.signum() / norm;
        out.push((lambda, grid.real_field(vec.into_iter().map(|v| v * sign).collect())));
    }
    Ok(out)
}

fn inverse_iteration(diag: &[f64], off: f64, lambda: f64, seed: usize) -> Vec<f64> {
    let n = diag.len();
    let shift = lambda + 1e-12 * (lambda.abs() + 1.0);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (((i + seed) * 7919) % 13) as f64).collect();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for _ in 0..4 {
        // Thomas solve of (H − shift) y = x
        let mut denom = diag[0] - shift;
        c[0] = off / denom;
        d[0] = x[0] / denom;
        for i in 1..n {
            denom = diag[i] - shift - off * c[i - 1];
            if denom.abs() < 1e-300 {
                denom = 1e-300;
            }
            c[i] = off / denom;
            d[i] = (x[i] - off * d[i - 1]) / denom;
        }
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}

/// Trusted-window settings for the shape function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ShapeOptions {
    pub xi_window: f64,
    pub density_floor: f64,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        Self { xi_window: 6.0, density_floor: 1e-14 }
    }
}

/// Adimensional ground-state profile in the centred, rms-scaled coordinate
/// ξ = (x − ⟨x⟩₀)/σ₀, with ρ(ξ) = 𝒩 exp(2R(ξ)) and G = 2R'.
#[derive(Debug, Clone)]
pub struct ShapeFunction {
    pub xi: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub rho: Vec<f64>,
    pub trusted: Vec<bool>,
    pub k2: f64,
    pub sigma0: f64,
    pub energy: f64,
    /// Mean position of the seed state.
    pub center: f64,
    pub n_const: f64,
    pub units: Units,
    pub options: ShapeOptions,
    seed: ComplexField,
    interp: SpectralInterpolant,
}

/// Builds the shape function of a converged ground state.
pub fn extract_shape(state: &StationaryState, opts: ShapeOptions) -> Result<ShapeFunction> {
    let psi = &state.psi0;
    let grid = &psi.grid;
    let (sigma0, c0) = (state.sigma0, state.mean_x);
    let interp = psi.interpolant();
    let peak = interp.eval(c0).re;
    if !(peak > 0.0) {
        return Err(Error::NodeDetected { x: c0 });
    }
    let dpsi = spectral_derivative(psi, 1);
    let n = grid.n_points();
    let xi: Vec<f64> = (0..n).map(|j| (grid.x(j) - c0) / sigma0).collect();
    let rho: Vec<f64> = psi.values.iter().map(|z| sigma0 * z.norm_sqr()).collect();
    let trusted: Vec<bool> = xi.iter().zip(&rho).map(|(x, r)| x.abs() <= opts.xi_window && *r > opts.density_floor).collect();
    let dxi = grid.dx() / sigma0;

    let mut r = vec![f64::NAN; n];
    let mut g = vec![f64::NAN; n];
    for j in (0..n).filter(|&j| trusted[j]) {
        r[j] = (psi.values[j].re / peak).ln();
        g[j] = 2.0 * sigma0 * dpsi.values[j].re / psi.values[j].re;
    }
    extrapolate_linear(&mut r, &trusted);
    extrapolate_constant(&mut g, &trusted);

    let n_const = 1.0 / (psi.values.iter().map(|z| (z.re / peak).powi(2)).sum::<f64>() * dxi);
    // ∫G²ρ dξ = 4σ₀²∫ψ₀'² dx, summed over the whole grid so the tails are
    // not dropped (they matter at the 1e-8 level)
    let k2 = 4.0 * sigma0 * sigma0 * dpsi.values.iter().map(|z| z.re * z.re).sum::<f64>() * grid.dx();
    Ok(ShapeFunction {
        xi,
        r,
        g,
        rho,
        trusted,
        k2,
        sigma0,
        energy: state.energy,
        center: c0,
        n_const,
        units: state.units,
        options: opts,
        seed: psi.clone(),
        interp,
    })
}

fn extrapolate_linear(r: &mut [f64], trusted: &[bool]) {
    let first = trusted.iter().position(|&t| t);
    let last = trusted.iter().rposition(|&t| t);
    let (Some(a), Some(b)) = (first, last) else { return };
    if b > a {
        let slope_l = if a + 1 <= b { r[a + 1] - r[a] } else { 0.0 };
        let slope_r = r[b] - r[b - 1];
        for j in 0..a {
            r[j] = r[a] - slope_l * (a - j) as f64;
        }
        for j in b + 1..r.len() {
            r[j] = r[b] + slope_r * (j - b) as f64;
        }
    }
}

fn extrapolate_constant(g: &mut [f64], trusted: &[bool]) {
    let (Some(a), Some(b)) = (trusted.iter().position(|&t| t), trusted.iter().rposition(|&t| t)) else { return };
    let (ga, gb) = (g[a], g[b]);
    g[..a].iter_mut().for_each(|v| *v = ga);
    g[b + 1..].iter_mut().for_each(|v| *v = gb);
}

impl ShapeFunction {
    pub fn grid(&self) -> &Grid1D {
        &self.seed.grid
    }

    /// The ground state on its own grid.
    pub fn seed(&self) -> &ComplexField {
        &self.seed
    }

    /// Grid spacing in ξ.
    pub fn dxi(&self) -> f64 {
        self.grid().dx() / self.sigma0
    }

    /// Ground-state amplitude translated so its mean sits at `y = 0`.
    pub fn centered_amplitude(&self, y: f64) -> f64 {
        self.interp.eval(y + self.center).re
    }

    pub fn centered_amplitudes(&self, ys: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = ys.iter().map(|y| y + self.center).collect();
        self.interp.eval_many(&shifted).into_iter().map(|z| z.re).collect()
    }

    /// The centred seed ψ₀(x + ⟨x⟩₀) sampled on `grid`.
    pub fn centered_seed(&self, grid: &Grid1D) -> ComplexField {
        let vals = self.centered_amplitudes(&grid.nodes());
        grid.complex_field(vals.into_iter().map(|v| C64::new(v, 0.0)).collect())
    }

    /// ∫ f(ξ) ρ(ξ) dξ over the whole seed grid.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.xi.iter().zip(&self.rho).map(|(&x, &r)| f(x) * r).sum::<f64>() * self.dxi()
    }

    /// Quadrature nodes `(ξ_j, ρ_j dξ)` for density averages. Nodes with
    /// negligible weight are skipped.
    pub fn quadrature_nodes(&self) -> Vec<(f64, f64)> {
        let dxi = self.dxi();
        let peak = self.rho.iter().cloned().fold(0.0, f64::max);
        (0..self.xi.len())
            .filter(|&j| self.rho[j] > 1e-30 * peak)
            .map(|j| (self.xi[j], self.rho[j] * dxi))
            .collect()
    }

    /// Relative weight of the density at the trusted-window edges.
    pub fn edge_weight(&self) -> f64 {
        let peak = self.rho.iter().cloned().fold(0.0, f64::max);
        let (Some(a), Some(b)) = (self.trusted.iter().position(|&t| t), self.trusted.iter().rposition(|&t| t)) else {
            return 1.0;
        };
        self.rho[a].max(self.rho[b]) / peak
    }

    /// Writes `xi, R, G, rho` for the trusted window.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["xi", "R", "G", "rho"])?;
        for j in (0..self.xi.len()).filter(|&j| self.trusted[j]) {
            w.write_record(&[self.xi[j], self.r[j], self.g[j], self.rho[j]].map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{quadrature, spectral_derivative_real};

    fn harmonic_state() -> (StaticPotential, StationaryState) {
        let grid = Grid1D::new(512, -10.0, 10.0).unwrap();
        let pot = StaticPotential::harmonic(1.0, 1.0).unwrap();
        let state = ground_state(&pot, &grid, Units::default(), &GroundStateOptions::default()).unwrap();
        (pot, state)
    }

    #[test]
    fn harmonic_ground_state() {
        let (_, s) = harmonic_state();
        assert!((s.sigma0 - 0.5f64.sqrt()).abs() < 1e-4, "sigma0 = {}", s.sigma0);
        assert!((s.energy - 0.5).abs() < 1e-6, "E0 = {}", s.energy);
        assert!((s.norm_check - 1.0).abs() < 1e-10);
        assert!(s.mean_x.abs() < 1e-10);
    }

    #[test]
    fn harmonic_virial() {
        let (pot, s) = harmonic_state();
        let grid = &s.psi0.grid;
        let v = pot.sample(grid).values;
        let pv: f64 = s.psi0.values.iter().zip(&v.values).map(|(z, v)| z.norm_sqr() * v).sum::<f64>() * grid.dx();
        let t = s.energy - pv;
        assert!((t - pv).abs() < 1e-5);
        assert!((pv - s.energy / 2.0).abs() < 1e-5);
    }

    #[test]
    fn fd_spectrum_of_harmonic_well() {
        let grid = Grid1D::new(1024, -10.0, 10.0).unwrap();
        let pot = StaticPotential::harmonic(1.0, 1.0).unwrap();
        let coarse = eigensolve_fd(&pot, &grid, Units::default(), 3).unwrap();
        let fine_grid = Grid1D::new(2048, -10.0, 10.0).unwrap();
        let fine = eigensolve_fd(&pot, &fine_grid, Units::default(), 3).unwrap();
        for (i, expected) in [0.5, 1.5, 2.5].into_iter().enumerate() {
            // O(dx²) on either grid, Richardson removes the leading term
            assert!((coarse[i].0 - expected).abs() < 2e-4 * (i + 1) as f64);
            let extrapolated = (4.0 * fine[i].0 - coarse[i].0) / 3.0;
            assert!((extrapolated - expected).abs() < 1e-8, "level {i}: {extrapolated}");
        }
        // parity alternates
        for (i, (_, vec)) in coarse.iter().enumerate() {
            let n = vec.len();
            // reflection x -> -x maps node j to n - j on this grid
            let dot: f64 = (1..n).map(|j| vec.values[j] * vec.values[n - j]).sum::<f64>() * grid.dx();
            let expected = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((dot - expected).abs() < 1e-6, "level {i}: {dot}");
        }
    }

    #[test]
    fn fd_ground_vector_matches_imaginary_time() {
        let (pot, s) = harmonic_state();
        let fd = eigensolve_fd(&pot, &s.psi0.grid, Units::default(), 1).unwrap();
        let fd_state = fd[0].1.to_complex();
        assert!(fd_state.l2_distance(&s.psi0) < 1e-4);
    }

    #[test]
    fn quartic_energy_matches_fd_oracle() {
        let pot = StaticPotential::quartic(1.0, 1.0, 0.1).unwrap();
        let grid = Grid1D::new(1024, -10.0, 10.0).unwrap();
        let s = ground_state(&pot, &grid, Units::default(), &GroundStateOptions::default()).unwrap();
        let e1 = eigensolve_fd(&pot, &grid, Units::default(), 1).unwrap()[0].0;
        let e2 = eigensolve_fd(&pot, &Grid1D::new(2048, -10.0, 10.0).unwrap(), Units::default(), 1).unwrap()[0].0;
        let oracle = (4.0 * e2 - e1) / 3.0;
        assert!((s.energy - oracle).abs() < 1e-5, "{} vs {}", s.energy, oracle);
    }

    #[test]
    fn harmonic_shape_is_gaussian() {
        let (_, s) = harmonic_state();
        let shape = extract_shape(&s, ShapeOptions::default()).unwrap();
        assert!((shape.k2 - 1.0).abs() < 1e-4, "K2 = {}", shape.k2);
        for j in 0..shape.xi.len() {
            let xi = shape.xi[j];
            if xi.abs() <= 4.0 {
                assert!((shape.r[j] + xi * xi / 4.0).abs() < 1e-4, "R({xi}) = {}", shape.r[j]);
                assert!((shape.g[j] + xi).abs() < 1e-4, "G({xi}) = {}", shape.g[j]);
            }
        }
        assert!((shape.expect(|_| 1.0) - 1.0).abs() < 1e-8);
        assert!(shape.expect(|x| x).abs() < 1e-8);
        assert!((shape.expect(|x| x * x) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quartic_k2_matches_fd_derivative() {
        let pot = StaticPotential::quartic(1.0, 1.0, 0.1).unwrap();
        let grid = Grid1D::new(1024, -10.0, 10.0).unwrap();
        let s = ground_state(&pot, &grid, Units::default(), &GroundStateOptions::default()).unwrap();
        let shape = extract_shape(&s, ShapeOptions::default()).unwrap();
        // independent route: fourth-order finite difference of R(ξ)
        let h = shape.dxi();
        let mut k2 = 0.0;
        for j in 2..shape.xi.len() - 2 {
            if shape.trusted[j] && shape.trusted[j - 2] && shape.trusted[j + 2] {
                let r = &shape.r;
                let dr = (-r[j + 2] + 8.0 * r[j + 1] - 8.0 * r[j - 1] + r[j - 2]) / (12.0 * h);
                k2 += 4.0 * dr * dr * shape.rho[j] * h;
            }
        }
        assert!((k2 - shape.k2).abs() < 1e-4, "{k2} vs {}", shape.k2);
    }

    #[test]
    fn shape_rebuilds_density() {
        let (_, s) = harmonic_state();
        let shape = extract_shape(&s, ShapeOptions::default()).unwrap();
        for j in (0..shape.xi.len()).filter(|&j| shape.trusted[j]) {
            let rebuilt = shape.n_const * (2.0 * shape.r[j]).exp() / shape.sigma0;
            assert!((rebuilt - s.psi0.values[j].norm_sqr()).abs() < 1e-8);
        }
    }

    #[test]
    fn stationary_hjm_read_off_gives_potential() {
        // −[(m/2)u² + (ħ/2)u'] for the real ground state is E₀ − V
        let pot = StaticPotential::quartic(1.0, 1.0, 0.1).unwrap();
        let grid = Grid1D::new(1024, -10.0, 10.0).unwrap();
        let s = ground_state(&pot, &grid, Units::default(), &GroundStateOptions::default()).unwrap();
        let shape = extract_shape(&s, ShapeOptions::default()).unwrap();
        let psi = s.psi0.density();
        let _ = quadrature(&psi);
        let d1 = spectral_derivative_real(&grid.real_field(s.psi0.values.iter().map(|z| z.re).collect()), 1);
        let d2 = spectral_derivative_real(&grid.real_field(s.psi0.values.iter().map(|z| z.re).collect()), 2);
        for j in (0..grid.n_points()).filter(|&j| shape.trusted[j]) {
            let p = s.psi0.values[j].re;
            let u = d1.values[j] / p;
            let du = d2.values[j] / p - u * u;
            let q = 0.5 * u * u + 0.5 * du;
            let v = pot.evaluate(grid.x(j));
            assert!((q - (v - s.energy)).abs() < 1e-6, "x = {}: {}", grid.x(j), q - (v - s.energy));
        }
    }

    #[test]
    fn leaking_state_is_reported() {
        let grid = Grid1D::new(128, -2.0, 2.0).unwrap();
        let pot = StaticPotential::harmonic(1.0, 0.05).unwrap();
        let r = ground_state(&pot, &grid, Units::default(), &GroundStateOptions::default());
        assert!(matches!(r, Err(Error::BoundaryLeakage { .. })), "{r:?}");
    }

    #[test]
    fn iteration_cap_is_reported() {
        let grid = Grid1D::new(128, -8.0, 8.0).unwrap();
        let pot = StaticPotential::quartic(1.0, 1.0, 0.1).unwrap();
        let opts = GroundStateOptions { max_iterations: 3, ..Default::default() };
        assert!(matches!(ground_state(&pot, &grid, Units::default(), &opts), Err(Error::NoConvergence { .. })));
    }
}
