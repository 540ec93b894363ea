//! Python module `ionsep`: one separation setup at a fixed final time, with the
//! objective, optimizers, verifier, noise study and line fit.

use ionsep_core::line;
use ionsep_core::model::{derive_endpoints, ATOMIC_MASS_UNIT};
use ionsep_core::optim::{self, Method, OptimizerSpec};
use ionsep_core::verifier::{self, Hamiltonian, NoiseModel, VerifyContext};
use ionsep_core::{AnsatzParams, CostMode, Endpoints, Objective, ObjectiveSpec, PhysicalConfig, DEFAULT_OMEGA0};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(name: &str) -> PyResult<CostMode> {
    name.parse().map_err(|_| err(format!("unknown mode {name:?}; expected harmonic or cubic")))
}

/// Two ions separated by ramping a quadratic trap into a double well in `t_final` seconds.
#[pyclass(name = "Separation", frozen)]
pub struct PySeparation {
    config: PhysicalConfig,
    endpoints: Endpoints,
}

/// Verified outcome of one protocol.
#[pyclass(name = "Excitation", frozen, get_all)]
pub struct PyExcitation {
    /// Final energy above the target ground state, in ħω₀.
    pub e_exc_quanta: f64,
    /// Same in joules.
    pub e_exc: f64,
    /// Largest β(t), J/m⁴.
    pub beta_max: f64,
}

#[pyclass(name = "OptimizerRun", frozen, get_all)]
pub struct PyOptimizerRun {
    pub method: String,
    pub free: [f64; 3],
    /// Objective at the optimum, in ħω₀.
    pub value: f64,
    pub n_evals: usize,
    pub converged: bool,
}

#[pyclass(name = "NoiseStudy", frozen, get_all)]
pub struct PyNoiseStudy {
    pub sigma: f64,
    pub nominal_quanta: f64,
    /// None for draws whose perturbed controls were unphysical.
    pub samples_quanta: Vec<Option<f64>>,
    pub mean_quanta: f64,
    pub n_failed: usize,
}

impl PySeparation {
    fn objective(&self, mode: CostMode) -> Objective {
        Objective::new(self.config, self.endpoints, ObjectiveSpec::new(mode, &self.config))
    }

    fn params(&self, free: [f64; 3]) -> AnsatzParams {
        AnsatzParams::new(free, self.endpoints.gamma_minus, self.endpoints.gamma_plus)
    }

    fn context(&self, truncated: bool) -> VerifyContext {
        let mut ctx = VerifyContext::new(self.config, self.endpoints);
        if truncated {
            ctx.hamiltonian = Hamiltonian::HarmonicTruncated;
        }
        ctx
    }
}

#[pymethods]
impl PySeparation {
    #[new]
    #[pyo3(signature = (t_final, omega0 = DEFAULT_OMEGA0, ion_mass_amu = 9.0, alpha_final_ratio = -0.5, distance_ratio = 10.0))]
    fn new(t_final: f64, omega0: f64, ion_mass_amu: f64, alpha_final_ratio: f64, distance_ratio: f64) -> PyResult<Self> {
        let config =
            PhysicalConfig::new(ion_mass_amu * ATOMIC_MASS_UNIT, omega0, alpha_final_ratio, distance_ratio, t_final);
        let endpoints = derive_endpoints(&config).map_err(err)?;
        Ok(Self { config, endpoints })
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.config.t_final
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.config.omega0
    }

    #[getter]
    fn hbar_omega0(&self) -> f64 {
        self.config.hbar_omega0()
    }

    /// (d₀, d_f) in metres.
    #[getter]
    fn separations(&self) -> (f64, f64) {
        (self.endpoints.d0, self.endpoints.d_final)
    }

    /// (γ₋, γ₊)
    #[getter]
    fn gammas(&self) -> (f64, f64) {
        (self.endpoints.gamma_minus, self.endpoints.gamma_plus)
    }

    /// Final-trap ground energy in ħω₀.
    #[getter]
    fn ground_quanta(&self) -> f64 {
        self.endpoints.final_ground_energy() / self.config.hbar_omega0()
    }

    /// Objective in ħω₀ for free coefficients (a₁₀, a₁₁, a₁₂).
    #[pyo3(signature = (free, mode = "cubic"))]
    fn objective_value(&self, free: [f64; 3], mode: &str) -> PyResult<f64> {
        Ok(self.objective(self::mode(mode)?).value_quanta(free))
    }

    /// Sampled controls (t, α, β, d).
    #[pyo3(signature = (free, n_samples = 2001))]
    fn controls(&self, free: [f64; 3], n_samples: usize) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut ctx = self.context(false);
        ctx.n_samples = n_samples;
        let wf = ctx.waveforms(&self.params(free)).map_err(err)?;
        Ok((wf.grid, wf.alpha, wf.beta, wf.d))
    }

    /// Propagates the initial ground state through the protocol's controls.
    #[pyo3(signature = (free, truncated = false))]
    fn verify(&self, free: [f64; 3], truncated: bool) -> PyResult<PyExcitation> {
        let (report, wf) = self.context(truncated).verify(&self.params(free)).map_err(err)?;
        Ok(PyExcitation { e_exc_quanta: report.e_exc_quanta, e_exc: report.e_exc, beta_max: wf.beta_max().1 })
    }

    /// One optimizer run from a cold start. `method` is NM, GA, PS, SA or CMA.
    #[pyo3(signature = (method, mode = "cubic", seed = 0, budget = optim::DEFAULT_BUDGET, dims = None))]
    fn optimize(&self, method: &str, mode: &str, seed: u64, budget: usize, dims: Option<usize>) -> PyResult<PyOptimizerRun> {
        let method: Method = method.parse().map_err(err)?;
        let mode = self::mode(mode)?;
        let dims = dims.unwrap_or(if mode == CostMode::Harmonic { 2 } else { 3 });
        let mut spec = OptimizerSpec::new(method, dims, seed);
        spec.budget = budget;
        let objective = self.objective(mode);
        let run = optim::run(&spec, [0.0; 3], false, &objective).map_err(err)?;
        Ok(PyOptimizerRun {
            method: run.method.to_string(),
            free: run.free(),
            value: run.best_value / self.config.hbar_omega0(),
            n_evals: run.n_evals,
            converged: run.converged,
        })
    }

    /// Multiplicative N(1, σ) noise on α and β, one factor per trace.
    #[pyo3(signature = (free, sigma, n_draws = 100, seed = 0))]
    fn noise(&self, free: [f64; 3], sigma: f64, n_draws: usize, seed: u64) -> PyResult<PyNoiseStudy> {
        let hw = self.config.hbar_omega0();
        let s = verifier::noise_study(&self.params(free), sigma, n_draws, seed, NoiseModel::PerTrace, &self.context(false))
            .map_err(err)?;
        Ok(PyNoiseStudy {
            sigma,
            nominal_quanta: s.nominal_e_exc / hw,
            samples_quanta: s.e_exc_samples.iter().map(|e| e.map(|e| e / hw)).collect(),
            mean_quanta: s.mean / hw,
            n_failed: s.n_failed,
        })
    }
}

/// Principal-axis line through 3-D points: (centroid, unit direction, rms residual).
#[pyfunction]
fn fit_line(points: Vec<[f64; 3]>) -> PyResult<([f64; 3], [f64; 3], f64)> {
    let fit = line::fit_line(&points).map_err(err)?;
    Ok((fit.centroid, fit.direction, fit.residual_rms))
}

#[pymodule]
fn ionsep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySeparation>()?;
    m.add_class::<PyExcitation>()?;
    m.add_class::<PyOptimizerRun>()?;
    m.add_class::<PyNoiseStudy>()?;
    m.add_function(wrap_pyfunction!(fit_line, m)?)?;
    Ok(())
}
