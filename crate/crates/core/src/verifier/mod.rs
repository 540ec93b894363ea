//! Actual excitation energy under the full two-ion Hamiltonian
//!
//! H = p₁²/2m + p₂²/2m + α(t)(q₁² + q₂²) + β(t)(q₁⁴ + q₂⁴) + C_c/(q₁ − q₂),
//!
//! propagated as a thawed Gaussian: the centre follows the classical equations of motion
//! and the covariance follows the linearized flow along that centre. Internally the
//! integration runs in oscillator units of the reference frequency ω₀ (length
//! √(ħ/mω₀), time 1/ω₀, energy ħω₀, unit mass); the public types are SI.

mod gaussian;
mod noise;

pub use gaussian::{
    excitation, excitation_with, initial_state, propagate, propagate_with, ExcitationReport, GaussianState2D,
    Hamiltonian, Method, Propagation, DEFAULT_SUBSTEPS,
};
pub use noise::{noise_study, perturb_controls, NoiseModel, NoiseStudy};

use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzParams;
use crate::error::Result;
use crate::inverse::{controls_for, ControlWaveforms, DEFAULT_SAMPLES};
use crate::model::{Endpoints, PhysicalConfig};

/// Everything the verifier needs besides the parameters under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyContext {
    pub config: PhysicalConfig,
    pub endpoints: Endpoints,
    pub n_samples: usize,
    pub hamiltonian: Hamiltonian,
    /// RK4 steps per waveform interval.
    pub substeps: usize,
}

impl VerifyContext {
    pub fn new(config: PhysicalConfig, endpoints: Endpoints) -> Self {
        Self { config, endpoints, n_samples: DEFAULT_SAMPLES, hamiltonian: Hamiltonian::Full, substeps: DEFAULT_SUBSTEPS }
    }

    pub fn waveforms(&self, params: &AnsatzParams) -> Result<ControlWaveforms> {
        Ok(controls_for(&self.config, &self.endpoints, params, self.n_samples)?.1)
    }

    /// Excitation of a prescribed set of waveforms, starting from the ground state of
    /// their first sample.
    pub fn verify_waveforms(&self, waveforms: &ControlWaveforms) -> Result<ExcitationReport> {
        let start = gaussian::ground_state_of(waveforms, 0, &self.config)?;
        let prop = propagate_with(&start, waveforms, &self.config, self.hamiltonian, self.substeps)?;
        excitation_with(&prop.state, waveforms, &self.config, self.hamiltonian)
    }

    pub fn verify(&self, params: &AnsatzParams) -> Result<(ExcitationReport, ControlWaveforms)> {
        let wf = self.waveforms(params)?;
        let report = self.verify_waveforms(&wf)?;
        Ok((report, wf))
    }
}
