//! Scenario pipeline, verification checks and the preset suite.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classical::{integrate_envelope, integrate_trajectory, EnvelopeTrajectory, SafeInterval};
use crate::control::{ControlLaw, ControlPotential, PotentialDrive};
use crate::error::{Error, Result};
use crate::family::PacketFamily;
use crate::grid::{spectral_derivative, ComplexField, Grid1D};
use crate::nelson::{nelson_run_with, write_ensemble_csv, EnsembleStats, NelsonOptions};
use crate::potential::StaticPotential;
use crate::propagation::{tdse_propagate_with, PropagationOptions, PropagationRun};
use crate::rng::RngStream;
use crate::scenario::{preset, preset_names, LawSpec, Scenario, SigmaSource, StateKind};
use crate::spectrum::{extract_shape, ground_state, GroundStateOptions, ShapeFunction, ShapeOptions, StationaryState};
use crate::states::{write_state_csv, ObservableRecord, OBSERVABLE_COLUMNS};
use crate::Units;

/// Factor by which an expected-fail check must miss its bound.
pub const EXPECTED_FAIL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub expected_fail: bool,
    /// `pass` for ordinary checks; a miss by ≥ 10× for expected failures.
    pub nominal: bool,
}

impl Check {
    fn upper(name: &str, measured: f64, bound: f64, expected_fail: bool) -> Self {
        let pass = measured.is_finite() && measured <= bound;
        let nominal = if expected_fail { measured.is_finite() && measured >= EXPECTED_FAIL_FACTOR * bound } else { pass };
        Self { name: name.to_string(), measured, bound, pass, expected_fail, nominal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ground_energy: Option<f64>,
    pub sigma0: Option<f64>,
    pub k2: Option<f64>,
    pub center: Option<f64>,
    pub ground_iterations: Option<usize>,
    pub trajectory_energy_drift: Option<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub flagged_particles: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub stage: Stage,
    pub scenario: Scenario,
    pub summary: Summary,
    pub checks: Vec<Check>,
    pub files: Vec<FileEntry>,
    pub nominal: bool,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Human-readable form: scenario echo, check table and file manifest.
    pub fn to_text(&self) -> String {
        let mut t = format!("# report for {} (stage {:?}, nominal = {})\n\n", self.name, self.stage, self.nominal);
        let _ = writeln!(t, "[scenario]\n{}", self.scenario.to_toml());
        let _ = writeln!(t, "[checks]");
        t.push_str(&verify_suite(&[(self.name.clone(), Some(self.clone()))]).table);
        let _ = writeln!(t, "\n[files]");
        for f in &self.files {
            let _ = writeln!(t, "{}: {}", f.file, f.columns.join(","));
        }
        t
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Last pipeline stage to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ground,
    Classical,
    Envelope,
    Synth,
    Full,
}

struct Outputs {
    dir: Option<PathBuf>,
    files: Vec<FileEntry>,
}

impl Outputs {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf), files: Vec::new() })
    }

    /// Runs `write` on the target path when an output directory is set.
    fn emit(&mut self, file: &str, columns: &[&str], write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(file);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write(&path)?;
            self.files.push(FileEntry { file: file.to_string(), columns: columns.iter().map(|c| c.to_string()).collect() });
        }
        Ok(())
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

/// Relative virial residual |2⟨T⟩ − ⟨xV'⟩| / 2⟨T⟩ of a stationary state.
pub fn virial_residual(state: &StationaryState, pot: &StaticPotential) -> f64 {
    let psi = &state.psi0;
    let grid = &psi.grid;
    let d = spectral_derivative(psi, 1);
    let Units { hbar, mass } = state.units;
    let dx = grid.dx();
    let kinetic: f64 = d.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx * hbar * hbar / (2.0 * mass);
    let xv: f64 = psi.values.iter().enumerate().map(|(j, z)| grid.x(j) * pot.gradient(grid.x(j)) * z.norm_sqr()).sum::<f64>() * dx;
    (2.0 * kinetic - xv).abs() / (2.0 * kinetic)
}

/// Largest error of `d(Δx²)/dt = ⟨{x_c, p_c}⟩/m` over uniformly spaced
/// records, with a five-point centred derivative.
pub fn anticommutator_error(records: &[ObservableRecord], mass: f64) -> f64 {
    if records.len() < 5 {
        return 0.0;
    }
    let h = records[1].t - records[0].t;
    // the closing record may fall off the sampling lattice
    let uniform = records.windows(2).take_while(|w| ((w[1].t - w[0].t) - h).abs() < 1e-9 * h.abs().max(1.0)).count() + 1;
    let var: Vec<f64> = records[..uniform].iter().map(|r| r.delta_x * r.delta_x).collect();
    (2..uniform.saturating_sub(2))
        .map(|i| {
            let d = (var[i - 2] - 8.0 * var[i - 1] + 8.0 * var[i + 1] - var[i + 2]) / (12.0 * h);
            (d - records[i].anticomm / mass).abs()
        })
        .fold(0.0, f64::max)
}

/// Everything a run produced, for callers that need more than the report.
pub struct Artifacts {
    pub report: Report,
    pub shape: Option<Arc<ShapeFunction>>,
    pub family: Option<PacketFamily>,
    pub run: Option<PropagationRun>,
    pub ensemble: Vec<EnsembleStats>,
}

/// Full pipeline.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<Report> {
    Ok(run_pipeline(s, out, Stage::Full)?.report)
}

/// Runs the pipeline through `stage`, writing CSVs and `report.json` into
/// `out` when given.
pub fn run_pipeline(s: &Scenario, out: Option<&Path>, stage: Stage) -> Result<Artifacts> {
    s.validate()?;
    let units = s.units();
    let mut outputs = Outputs::new(out)?;
    let mut summary = Summary::default();
    let mut checks = Vec::new();
    let expect = |name: &str| s.checks.expect_fail.iter().any(|n| n == name);
    let pot_spec = s.potential.as_ref().expect("validated");
    let pot = staged("potential", pot_spec.build(units.mass))?;
    let grid = staged("grid", s.grid.build())?;

    // ground state and shape
    let ground_grid = staged("ground", s.ground.grid.as_ref().map_or(Ok(grid.clone()), |g| g.build()))?;
    let gopts = GroundStateOptions { dtau: s.ground.dtau, tol: s.ground.tol, ..Default::default() };
    let state = staged("ground", ground_state(&pot, &ground_grid, units, &gopts))?;
    let shape = Arc::new(staged("ground", extract_shape(&state, ShapeOptions { xi_window: s.ground.xi_window, ..Default::default() }))?);
    summary.ground_energy = Some(state.energy);
    summary.sigma0 = Some(shape.sigma0);
    summary.k2 = Some(shape.k2);
    summary.center = Some(shape.center);
    summary.ground_iterations = Some(state.iterations);
    checks.push(Check::upper("ground-energy-virial", virial_residual(&state, &pot), 1e-6, expect("ground-energy-virial")));
    outputs.emit("shape.csv", &["xi", "R", "G", "rho"], |p| shape.write_csv(p))?;

    let finish = |stage, summary, checks: Vec<Check>, outputs: Outputs, shape, family, run, ensemble| -> Result<Artifacts> {
        let nominal = checks.iter().all(|c: &Check| c.nominal);
        let mut report = Report { name: s.name.clone(), stage, scenario: s.clone(), summary, checks, files: outputs.files, nominal };
        if let Some(d) = &outputs.dir {
            report.files.push(FileEntry { file: "report.json".into(), columns: Vec::new() });
            report.files.push(FileEntry { file: "report.txt".into(), columns: Vec::new() });
            report.write_json(&d.join("report.json"))?;
            std::fs::write(d.join("report.txt"), report.to_text())?;
        }
        Ok(Artifacts { report, shape, family, run, ensemble })
    };
    if stage == Stage::Ground {
        return finish(Stage::Ground, summary, checks, outputs, Some(shape), None, None, Vec::new());
    }

    // classical centre
    let safe = SafeInterval { lo: grid.x_min(), hi: grid.x_max() };
    let trajectory = Arc::new(staged(
        "classical",
        integrate_trajectory(&pot, units, s.initial.x0, s.initial.v0, s.trajectory_dt(), s.trajectory_span(), Some(safe)),
    )?);
    summary.trajectory_energy_drift = Some(trajectory.energy_drift(&pot, units));
    outputs.emit("trajectory.csv", &["t", "x_cl", "v_cl", "a_cl"], |p| trajectory.write_csv(p))?;
    if stage == Stage::Classical {
        return finish(Stage::Classical, summary, checks, outputs, Some(shape), None, None, Vec::new());
    }

    // envelope
    let kind = s.state_kind();
    let envelope: Option<Arc<EnvelopeTrajectory>> = match kind {
        StateKind::Coherent => None,
        StateKind::Squeezed => {
            let env = match s.control.sigma_source {
                SigmaSource::Envelope => {
                    let sigma_init = s.initial.sigma_init.unwrap_or(s.initial.sigma_ratio * shape.sigma0);
                    staged("envelope", integrate_envelope(&pot, &shape, &trajectory, sigma_init, s.initial.sigma_dot_init))?
                }
                SigmaSource::Prescribed => {
                    let path = s.control.sigma_csv.as_ref().expect("validated");
                    staged("envelope", EnvelopeTrajectory::prescribed_from_csv(path, s.trajectory_dt(), &shape))?
                }
            };
            if env.end() < s.t_end() - 1e-9 * s.run.dt {
                return Err(Error::validation("run.T", format!("exceeds the envelope span (ends at {})", env.end())));
            }
            let (lo, hi) = env.samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.sigma), b.max(p.sigma)));
            summary.sigma_min = Some(lo);
            summary.sigma_max = Some(hi);
            outputs.emit("envelope.csv", &["t", "sigma", "sigma_dot", "sigma_ddot"], |p| env.write_csv(p))?;
            Some(Arc::new(env))
        }
    };
    if stage == Stage::Envelope {
        return finish(Stage::Envelope, summary, checks, outputs, Some(shape), None, None, Vec::new());
    }

    // family and control
    let family = staged(
        "synth",
        match &envelope {
            None => PacketFamily::coherent(pot.clone(), shape.clone(), trajectory.clone()),
            Some(env) => PacketFamily::squeezed(pot.clone(), shape.clone(), trajectory.clone(), env.clone()),
        },
    )?;
    check_grid_fit(&family, &grid)?;
    let control = match s.control.law {
        LawSpec::Off => None,
        law => {
            let law = match law {
                LawSpec::Coherent => ControlLaw::Coherent,
                LawSpec::Squeezed => ControlLaw::Squeezed,
                _ => ControlLaw::HjmResidual,
            };
            Some(staged("synth", ControlPotential::new(law, s.control.gauge, family.clone()))?.with_compat_eq50(s.control.compat_eq50))
        }
    };
    if let (Some(cp), true) = (&control, s.control.dump_slices) {
        let n_steps = run_steps(s);
        let times: Vec<f64> = (0..=n_steps).step_by(s.control.slice_every).map(|k| k as f64 * s.run.dt).collect();
        outputs.emit("control_slices.csv", &["t", "x", "V"], |p| cp.write_slices_csv(&grid, &times, p))?;
    }
    if stage == Stage::Synth {
        return finish(Stage::Synth, summary, checks, outputs, Some(shape), Some(family), None, Vec::new());
    }

    // propagation (and the ensemble)
    let drive: &dyn PotentialDrive = match &control {
        Some(cp) => cp,
        None => &pot,
    };
    let psi0 = staged("propagate", family.wavefunction(&grid, 0.0))?;
    let n_steps = run_steps(s);
    let popts = PropagationOptions::default();
    let dump_stride = s.run.sample_every * s.output.dump_every;
    let mut dumps: Vec<(usize, ComplexField)> = Vec::new();
    let mut keep = |k: usize, _t: f64, psi: &ComplexField| -> Result<()> {
        if s.output.dump_states && outputs.dir.is_some() && (k % dump_stride == 0 || k == n_steps) {
            dumps.push((k, psi.clone()));
        }
        Ok(())
    };
    let (run, ensemble) = if s.nelson.enabled {
        let nopts = NelsonOptions { n_particles: s.nelson.n_particles, seed: RngStream::new(s.nelson.seed, 0), bins: s.nelson.bins };
        staged("nelson", nelson_run_with(&psi0, drive, units, s.run.dt, n_steps, s.run.sample_every, &popts, &nopts, &mut keep))?
    } else {
        (staged("propagate", tdse_propagate_with(&psi0, drive, units, s.run.dt, n_steps, s.run.sample_every, &popts, &mut keep))?, Vec::new())
    };
    for (k, psi) in &dumps {
        outputs.emit(&format!("states/state_{k:07}.csv"), &["x", "re_psi", "im_psi", "rho"], |p| write_state_csv(psi, p))?;
    }
    outputs.emit("observables.csv", &OBSERVABLE_COLUMNS, |p| run.write_csv(p))?;
    if !ensemble.is_empty() {
        outputs.emit("ensemble.csv", &["t", "emp_mean", "emp_std", "l1_distance"], |p| write_ensemble_csv(&ensemble, p))?;
        summary.flagged_particles = ensemble.last().map(|e| e.flagged);
    }
    summary.steps = Some(n_steps);
    summary.samples = Some(run.records.len());

    checks.extend(run_checks(s, &family, &run, &ensemble)?);
    finish(Stage::Full, summary, checks, outputs, Some(shape), Some(family), Some(run), ensemble)
}

fn run_steps(s: &Scenario) -> usize {
    (s.t_end() / s.run.dt - 1e-9).ceil() as usize
}

/// The packet's ±6σ footprint must stay inside the grid along the whole run.
fn check_grid_fit(family: &PacketFamily, grid: &Grid1D) -> Result<()> {
    let stride = (family.trajectory.samples.len() / 2000).max(1);
    for sample in family.trajectory.samples.iter().step_by(stride) {
        if sample.t > family.end() {
            break;
        }
        let p = staged("synth", family.point(sample.t))?;
        let (lo, hi) = family.footprint(&p);
        if lo < grid.x_min() || hi > grid.x_max() {
            return Err(Error::validation(
                "grid",
                format!("packet footprint [{lo:.3}, {hi:.3}] at t = {:.3} leaves [{}, {}]", p.t, grid.x_min(), grid.x_max()),
            ));
        }
    }
    Ok(())
}

fn run_checks(s: &Scenario, family: &PacketFamily, run: &PropagationRun, ensemble: &[EnsembleStats]) -> Result<Vec<Check>> {
    let units = s.units();
    let expect = |name: &str| s.checks.expect_fail.iter().any(|n| n == name);
    let harmonic = s.potential.as_ref().is_some_and(|p| p.is_harmonic());
    let kind = s.state_kind();
    let controlled = s.control.law != LawSpec::Off;
    let recs = &run.records;
    let mut out = Vec::new();
    let max = |f: &dyn Fn(&ObservableRecord) -> f64| recs.iter().map(f).fold(0.0, f64::max);

    out.push(Check::upper("norm-drift", run.norm_drift(), 1e-9, expect("norm-drift")));
    out.push(Check::upper("boundary-leakage", max(&|r| r.boundary_leakage), 1e-8, expect("boundary-leakage")));
    let violation = recs
        .iter()
        .map(|r| {
            let (a, b) = r.uncertainty_slack(units);
            (-a).max(-b).max(0.0)
        })
        .fold(0.0, f64::max);
    out.push(Check::upper("uncertainty-chain", violation, 1e-10, expect("uncertainty-chain")));
    if harmonic && kind == StateKind::Coherent {
        let sat = max(&|r| (r.delta_x * r.delta_p - 0.5 * units.hbar).abs());
        out.push(Check::upper("uncertainty-saturation", sat, 1e-6, expect("uncertainty-saturation")));
    }
    out.push(Check::upper("anticommutator", anticommutator_error(recs, units.mass), 1e-5, expect("anticommutator")));

    let points = recs.iter().map(|r| family.point(r.t)).collect::<Result<Vec<_>>>()?;
    if controlled {
        let dev = recs.iter().zip(&points).map(|(r, p)| (r.mean_x - p.x).abs()).fold(0.0, f64::max);
        out.push(Check::upper("center-tracking", dev, 1e-4, expect("center-tracking")));
    }
    match kind {
        StateKind::Coherent => {
            let sigma0 = family.shape.sigma0;
            out.push(Check::upper("dispersion-constancy", max(&|r| (r.delta_x - sigma0).abs()), 1e-4, expect("dispersion-constancy")));
            if harmonic {
                let d0 = recs[0].delta_x;
                out.push(Check::upper("harmonic-dispersion-drift", max(&|r| (r.delta_x - d0).abs()), 1e-6, expect("harmonic-dispersion-drift")));
            }
        }
        StateKind::Squeezed => {
            let dev = recs.iter().zip(&points).map(|(r, p)| (r.delta_x - p.sigma).abs()).fold(0.0, f64::max);
            out.push(Check::upper("envelope-dispersion", dev, 1e-4, expect("envelope-dispersion")));
            if controlled {
                let k2 = family.shape.k2;
                let c = 4.0 * units.mass * units.mass / (units.hbar * units.hbar);
                let dev = recs
                    .iter()
                    .zip(&points)
                    .map(|(r, p)| (r.delta_u * r.delta_u * p.sigma * p.sigma * c / k2 - 1.0).abs())
                    .fold(0.0, f64::max);
                out.push(Check::upper("osmotic-squeezing-constant", dev, 1e-4, expect("osmotic-squeezing-constant")));
            }
        }
    }

    if !ensemble.is_empty() {
        let n = s.nelson.n_particles as f64;
        let mean = ensemble.iter().map(|e| (e.emp_mean - e.quantum_mean).abs() * n.sqrt() / e.quantum_std).fold(0.0, f64::max);
        out.push(Check::upper("nelson-mean", mean, 4.0, expect("nelson-mean")));
        let sd = ensemble.iter().map(|e| (e.emp_std / e.quantum_std - 1.0).abs() * n.sqrt()).fold(0.0, f64::max);
        out.push(Check::upper("nelson-std", sd, 5.0, expect("nelson-std")));
        // the multinomial error of the histogram scales as n^(-1/2)
        let bound = 0.02 * (1e5 / n).sqrt().max(1.0);
        out.push(Check::upper("nelson-l1", ensemble.iter().map(|e| e.l1_distance).fold(0.0, f64::max), bound, expect("nelson-l1")));
    }
    Ok(out)
}

/// Suite verdict: exit code and a printable table.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub code: i32,
    pub table: String,
}

/// 0 when every check is nominal, 1 when any is not, 2 when a preset
/// produced no report.
pub fn verify_suite(results: &[(String, Option<Report>)]) -> SuiteOutcome {
    let mut table = String::new();
    let _ = writeln!(table, "{:<28} {:<28} {:>12} {:>10}  status", "preset", "check", "measured", "bound");
    let (mut failed, mut missing) = (false, false);
    for (name, report) in results {
        match report {
            None => {
                missing = true;
                let _ = writeln!(table, "{name:<28} {:<28} {:>12} {:>10}  MISSING", "-", "-", "-");
            }
            Some(r) => {
                for c in &r.checks {
                    let status = match (c.expected_fail, c.nominal) {
                        (false, true) => "PASS",
                        (false, false) => "FAIL",
                        (true, true) => "XFAIL",
                        (true, false) => "XPASS",
                    };
                    failed |= !c.nominal;
                    let _ = writeln!(table, "{name:<28} {:<28} {:>12.3e} {:>10.1e}  {status}", c.name, c.measured, c.bound);
                }
            }
        }
    }
    let code = if missing {
        2
    } else if failed {
        1
    } else {
        0
    };
    let _ = writeln!(table, "suite: {}", ["nominal", "check failed", "missing output"][code as usize]);
    SuiteOutcome { code, table }
}

/// Runs every bundled preset into `out/<preset>/`; a preset that errors
/// counts as missing output.
pub fn run_presets(out: Option<&Path>, names: &[&str]) -> Vec<(String, Option<Report>, Option<Error>)> {
    names
        .iter()
        .map(|&name| {
            let dir = out.map(|d| d.join(name));
            match preset(name).and_then(|s| run_scenario(&s, dir.as_deref())) {
                Ok(r) => (name.to_string(), Some(r), None),
                Err(e) => (name.to_string(), None, Some(e)),
            }
        })
        .collect()
}

/// Loads `<dir>/<preset>/report.json` for every bundled preset.
pub fn load_preset_reports(dir: &Path) -> Vec<(String, Option<Report>)> {
    preset_names().into_iter().map(|n| (n.to_string(), Report::read_json(&dir.join(n).join("report.json")).ok())).collect()
}
