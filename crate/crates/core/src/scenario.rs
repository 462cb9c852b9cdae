//! Scenario configuration: TOML sections mirroring the pipeline stages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::Gauge;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::potential::StaticPotential;
use crate::Units;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsSpec {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitsSpec {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: 1024, x_min: -12.0, x_max: 12.0 }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D> {
        Grid1D::new(self.n, self.x_min, self.x_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSpec {
    /// Grid for the ground-state solve; the run grid when absent.
    pub grid: Option<GridSpec>,
    pub dtau: f64,
    pub tol: f64,
    pub xi_window: f64,
}

impl Default for GroundSpec {
    fn default() -> Self {
        Self { grid: None, dtau: 1e-3, tol: 1e-13, xi_window: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Harmonic {
        omega: f64,
    },
    #[serde(alias = "anharmonic-quartic")]
    Quartic {
        omega: f64,
        lambda: f64,
    },
    DoubleWell {
        a: f64,
        b: f64,
    },
    Morse {
        depth: f64,
        alpha: f64,
        x_e: f64,
    },
    /// Two-column CSV (x, V); relative paths resolve against the config file.
    Tabulated {
        path: PathBuf,
    },
}

impl PotentialSpec {
    pub fn build(&self, mass: f64) -> Result<StaticPotential> {
        match self {
            Self::Harmonic { omega } => StaticPotential::harmonic(mass, *omega),
            Self::Quartic { omega, lambda } => StaticPotential::quartic(mass, *omega, *lambda),
            Self::DoubleWell { a, b } => StaticPotential::double_well(*a, *b),
            Self::Morse { depth, alpha, x_e } => StaticPotential::morse(*depth, *alpha, *x_e),
            Self::Tabulated { path } => StaticPotential::from_csv(path),
        }
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self, Self::Harmonic { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Coherent,
    Squeezed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub x0: f64,
    pub v0: f64,
    /// Initial width in units of σ₀; ignored when `sigma_init` is given.
    pub sigma_ratio: f64,
    pub sigma_init: Option<f64>,
    pub sigma_dot_init: f64,
    /// Defaults to squeezed for the squeezed law, coherent otherwise.
    pub state: Option<StateKind>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self { x0: 0.0, v0: 0.0, sigma_ratio: 1.0, sigma_init: None, sigma_dot_init: 0.0, state: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    /// Integration step; `run.dt` when absent.
    pub dt: Option<f64>,
    /// Integrated span; `run.T` when absent.
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawSpec {
    #[default]
    Coherent,
    Squeezed,
    #[serde(alias = "hjm-residual")]
    Residual,
    /// Plain static potential (uncontrolled twin).
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaSource {
    #[default]
    Envelope,
    Prescribed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSpec {
    pub law: LawSpec,
    pub gauge: Gauge,
    pub sigma_source: SigmaSource,
    /// Two-column CSV (t, sigma) for the prescribed envelope.
    pub sigma_csv: Option<PathBuf>,
    pub compat_eq50: bool,
    pub dump_slices: bool,
    /// Steps between dumped slices.
    pub slice_every: usize,
}

impl Default for ControlSpec {
    fn default() -> Self {
        Self {
            law: LawSpec::Coherent,
            gauge: Gauge::ZeroAtCenter,
            sigma_source: SigmaSource::Envelope,
            sigma_csv: None,
            compat_eq50: false,
            dump_slices: false,
            slice_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub sample_every: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: None, sample_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelsonSpec {
    pub enabled: bool,
    pub n_particles: usize,
    pub seed: u64,
    pub bins: usize,
}

impl Default for NelsonSpec {
    fn default() -> Self {
        Self { enabled: false, n_particles: 100_000, seed: 0, bins: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub dump_states: bool,
    /// Observable samples between state dumps.
    pub dump_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, dump_states: false, dump_every: 100 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSpec {
    /// Checks that must fail, by at least tenfold (negative controls).
    pub expect_fail: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub units: UnitsSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub ground: GroundSpec,
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub nelson: NelsonSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
}

/// Every check name a report can carry.
pub const CHECK_NAMES: [&str; 14] = [
    "norm-drift",
    "boundary-leakage",
    "uncertainty-chain",
    "uncertainty-saturation",
    "anticommutator",
    "center-tracking",
    "dispersion-constancy",
    "harmonic-dispersion-drift",
    "envelope-dispersion",
    "osmotic-squeezing-constant",
    "ground-energy-virial",
    "nelson-mean",
    "nelson-std",
    "nelson-l1",
];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl Scenario {
    /// Parses and validates; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.span().map_or(0, |r| line_of(text, r.start)),
            message: e.message().to_string(),
        })?;
        if let Some(base) = base_dir {
            s.resolve_paths(base);
        }
        if s.name.is_empty() {
            s.name = Path::new(origin).file_stem().map_or_else(|| "scenario".into(), |n| n.to_string_lossy().into_owned());
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(PotentialSpec::Tabulated { path }) = &mut self.potential {
            fix(path);
        }
        if let Some(p) = &mut self.control.sigma_csv {
            fix(p);
        }
    }

    pub fn units(&self) -> Units {
        Units { hbar: self.units.hbar, mass: self.units.mass }
    }

    pub fn t_end(&self) -> f64 {
        self.run.t_end.unwrap_or(0.0)
    }

    pub fn trajectory_dt(&self) -> f64 {
        self.trajectory.dt.unwrap_or(self.run.dt)
    }

    pub fn trajectory_span(&self) -> f64 {
        self.trajectory.t_end.unwrap_or(self.t_end())
    }

    pub fn state_kind(&self) -> StateKind {
        self.initial.state.unwrap_or(match self.control.law {
            LawSpec::Squeezed => StateKind::Squeezed,
            _ if self.control.sigma_source == SigmaSource::Prescribed => StateKind::Squeezed,
            _ => StateKind::Coherent,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::validation(field, msg));
        if !(self.units.hbar > 0.0 && self.units.mass > 0.0) {
            return bad("units", "hbar and mass must be positive");
        }
        if self.potential.is_none() {
            return bad("potential", "a [potential] section with a `family` is required");
        }
        if self.grid.n < 16 || !(self.grid.x_max > self.grid.x_min) {
            return bad("grid", "need n >= 16 and x_max > x_min");
        }
        if let Some(g) = &self.ground.grid {
            if g.n < 16 || !(g.x_max > g.x_min) {
                return bad("ground.grid", "need n >= 16 and x_max > x_min");
            }
        }
        if !(self.ground.dtau > 0.0 && self.ground.tol > 0.0 && self.ground.xi_window > 0.0) {
            return bad("ground", "dtau, tol and xi_window must be positive");
        }
        if !(self.run.dt > 0.0 && self.run.dt.is_finite()) {
            return bad("run.dt", "must be positive");
        }
        match self.run.t_end {
            Some(t) if t >= self.run.dt && t.is_finite() => {}
            Some(_) => return bad("run.T", "must be at least one time step"),
            None => return bad("run.T", "run duration is required"),
        }
        if self.run.sample_every == 0 {
            return bad("run.sample_every", "must be at least 1");
        }
        if !(self.trajectory_dt() > 0.0) {
            return bad("trajectory.dt", "must be positive");
        }
        if self.t_end() > self.trajectory_span() * (1.0 + 1e-12) {
            return bad("run.T", "exceeds the trajectory span");
        }
        if !(self.initial.sigma_ratio > 0.0) || self.initial.sigma_init.is_some_and(|s| !(s > 0.0)) {
            return bad("initial.sigma_init", "initial width must be positive");
        }
        let kind = self.state_kind();
        match (self.control.law, kind) {
            (LawSpec::Coherent, StateKind::Squeezed) => return bad("initial.state", "the coherent law drives coherent states only"),
            (LawSpec::Squeezed, StateKind::Coherent) => return bad("initial.state", "the squeezed law drives squeezed states only"),
            _ => {}
        }
        if kind == StateKind::Coherent && (self.initial.sigma_ratio != 1.0 || self.initial.sigma_init.is_some() || self.initial.sigma_dot_init != 0.0) {
            return bad("initial.state", "a coherent state keeps the ground-state width; use state = \"squeezed\"");
        }
        if self.control.sigma_source == SigmaSource::Prescribed && self.control.sigma_csv.is_none() {
            return bad("control.sigma_csv", "a prescribed envelope needs a (t, sigma) CSV");
        }
        if self.control.dump_slices && self.control.slice_every == 0 {
            return bad("control.slice_every", "must be at least 1");
        }
        if self.nelson.enabled {
            if self.nelson.n_particles < 1000 {
                return bad("nelson.n_particles", "at least 1000 particles are required");
            }
            if self.nelson.bins == 0 {
                return bad("nelson.bins", "must be at least 1");
            }
        }
        if self.output.dump_states && self.output.dump_every == 0 {
            return bad("output.dump_every", "must be at least 1");
        }
        if let Some(name) = self.checks.expect_fail.iter().find(|n| !CHECK_NAMES.contains(&n.as_str())) {
            return Err(Error::validation("checks.expect_fail", format!("unknown check `{name}`")));
        }
        Ok(())
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml(&text, &path.display().to_string(), path.parent())
}

const PRESETS: [(&str, &str); 18] = [
    ("harmonic-coherent-on", include_str!("../presets/harmonic-coherent-on.toml")),
    ("harmonic-coherent-off", include_str!("../presets/harmonic-coherent-off.toml")),
    ("harmonic-squeezed-on", include_str!("../presets/harmonic-squeezed-on.toml")),
    ("harmonic-squeezed-off", include_str!("../presets/harmonic-squeezed-off.toml")),
    ("quartic-coherent-on", include_str!("../presets/quartic-coherent-on.toml")),
    ("quartic-coherent-off", include_str!("../presets/quartic-coherent-off.toml")),
    ("quartic-squeezed-on", include_str!("../presets/quartic-squeezed-on.toml")),
    ("quartic-squeezed-off", include_str!("../presets/quartic-squeezed-off.toml")),
    ("double-well-coherent-on", include_str!("../presets/double-well-coherent-on.toml")),
    ("double-well-coherent-off", include_str!("../presets/double-well-coherent-off.toml")),
    ("double-well-squeezed-on", include_str!("../presets/double-well-squeezed-on.toml")),
    ("double-well-squeezed-off", include_str!("../presets/double-well-squeezed-off.toml")),
    ("morse-coherent-on", include_str!("../presets/morse-coherent-on.toml")),
    ("morse-coherent-off", include_str!("../presets/morse-coherent-off.toml")),
    ("morse-squeezed-on", include_str!("../presets/morse-squeezed-on.toml")),
    ("morse-squeezed-off", include_str!("../presets/morse-squeezed-off.toml")),
    ("harmonic-coherent-nelson", include_str!("../presets/harmonic-coherent-nelson.toml")),
    ("harmonic-squeezed-nelson", include_str!("../presets/harmonic-squeezed-nelson.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<Scenario> {
    let text = preset_source(name).ok_or_else(|| Error::validation("preset", format!("unknown preset `{name}`")))?;
    Scenario::from_toml(text, name, None)
}
