//! Shortcut-to-adiabaticity controls for fast separation of two trapped ions.
//!
//! The pipeline runs bottom-up:
//!
//! * [`model`] derives the endpoint trap quantities from a [`PhysicalConfig`].
//! * [`ansatz`] evaluates the polynomial scaling functions ρ± and their derivatives.
//! * [`inverse`] inverts the Ermakov equations into mode frequencies, separation and lab
//!   controls α(t), β(t), and integrates the forced stretch-mode oscillator.
//! * [`cost`] turns a trajectory into the harmonic excitation cost and its cubic correction.
//! * [`optim`] holds five derivative-free minimizers and the warm-started final-time sweep.
//! * [`line`] fits a line through a cloud of optima and refines seeds along it.
//! * [`verifier`] propagates a Gaussian state through the full anharmonic two-ion
//!   Hamiltonian to measure the actual excitation, including control noise.

pub mod ansatz;
pub mod cost;
pub mod error;
pub mod inverse;
pub mod line;
pub mod model;
pub mod optim;
pub mod verifier;

pub use ansatz::{AnsatzParams, PolyEval, Scaling};
pub use cost::{CostMode, CostReport, Objective, ObjectiveSpec};
pub use error::{Error, Result};
pub use inverse::{ControlWaveforms, ModeTrajectory};
pub use model::{Endpoints, PhysicalConfig, DEFAULT_OMEGA0, LITERAL_OMEGA0};
