//! Controlled quantum wave packets in one dimension.
//!
//! Given a static potential `V(x)`, the crate computes its ground state, turns
//! it into an adimensional shape function, integrates the classical centre
//! trajectory and the width envelope, and synthesizes the time-dependent
//! controlling potential under which displaced (coherent) or breathing
//! (squeezed) copies of the ground state solve the Schrödinger equation
//! exactly. Split-operator propagation and Nelson diffusion sampling check the
//! construction independently.

pub mod classical;
pub mod control;
pub mod error;
pub mod family;
pub mod grid;
pub mod harness;
pub mod nelson;
pub mod ode;
pub mod potential;
pub mod propagation;
pub mod rng;
pub mod scenario;
pub mod spectrum;
pub mod states;

pub use error::{Error, Result};
pub use grid::{ComplexField, Grid1D, RealField};
pub use potential::{PotentialSample, StaticPotential};
pub use rng::RngStream;
pub use spectrum::{ground_state, extract_shape, GroundStateOptions, ShapeFunction, ShapeOptions, StationaryState};

/// Physical constants ħ and m; natural units by default.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}
