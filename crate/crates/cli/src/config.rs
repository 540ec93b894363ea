//! Experiment configuration: a TOML file with SI values. Every field has a default, so
//! an empty file describes the standard ⁹Be campaign.

use std::path::{Path, PathBuf};

use ionsep_core::cost::{DEFAULT_EPSILON, DEFAULT_SENTINEL_QUANTA};
use ionsep_core::inverse::DEFAULT_SAMPLES;
use ionsep_core::line::{DEFAULT_JUMP_FACTOR, DEFAULT_NU_EXTENSION, DEFAULT_NU_SAMPLES};
use ionsep_core::model::{derive_endpoints, ATOMIC_MASS_UNIT};
use ionsep_core::optim::{Method, MethodParams, OptimizerSpec, DEFAULT_BUDGET};
use ionsep_core::verifier::{Hamiltonian, NoiseModel, VerifyContext, DEFAULT_SUBSTEPS};
use ionsep_core::{CostMode, Endpoints, Objective, ObjectiveSpec, PhysicalConfig, DEFAULT_OMEGA0};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Final times (s), strictly ascending.
    pub t_grid: Vec<f64>,
    pub physical: PhysicalSection,
    pub objective: ObjectiveSection,
    pub methods: Vec<MethodEntry>,
    pub line_search: LineSearchSection,
    pub noise: NoiseSection,
    pub verifier: VerifierSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalSection {
    /// Ion mass in atomic mass units.
    pub ion_mass_amu: f64,
    /// rad/s
    pub omega0: f64,
    /// α(t_f)/α(0)
    pub alpha_final_ratio: f64,
    /// d(t_f)/d(0)
    pub distance_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub mode: CostMode,
    pub epsilon: f64,
    pub n_quantum: u32,
    /// Sentinel for unphysical parameters, in ħω₀.
    pub sentinel_quanta: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub method: Method,
    /// Defaults to 2 in harmonic mode and 3 in cubic mode.
    #[serde(default)]
    pub dims: Option<usize>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub params: MethodParams,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearchSection {
    /// Final times to sweep; empty means the whole `t_grid`.
    pub times: Vec<f64>,
    /// Explicit ν values; empty means the default grid around the cloud.
    pub nu_grid: Vec<f64>,
    pub nu_samples: usize,
    pub extension: f64,
    pub jump_factor: f64,
    /// Fraction of the farthest cloud points dropped before the final fit.
    pub trim: f64,
    /// Evaluation budget of each Nelder–Mead refinement.
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigmas: Vec<f64>,
    pub n_draws: usize,
    pub model: NoiseModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierSection {
    pub hamiltonian: Hamiltonian,
    pub substeps: usize,
    pub n_samples: usize,
}

/// Seven final times from 3.20 to 4.68 µs.
pub const DEFAULT_T_GRID: [f64; 7] = [3.20e-6, 3.43e-6, 3.66e-6, 3.92e-6, 4.17e-6, 4.43e-6, 4.68e-6];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            t_grid: DEFAULT_T_GRID.to_vec(),
            physical: PhysicalSection::default(),
            objective: ObjectiveSection::default(),
            methods: Method::ALL
                .iter()
                .map(|&method| MethodEntry { method, dims: None, budget: DEFAULT_BUDGET, params: MethodParams::default() })
                .collect(),
            line_search: LineSearchSection::default(),
            noise: NoiseSection::default(),
            verifier: VerifierSection::default(),
        }
    }
}

impl Default for PhysicalSection {
    fn default() -> Self {
        Self { ion_mass_amu: 9.0, omega0: DEFAULT_OMEGA0, alpha_final_ratio: -0.5, distance_ratio: 10.0 }
    }
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            mode: CostMode::Cubic,
            epsilon: DEFAULT_EPSILON,
            n_quantum: 0,
            sentinel_quanta: DEFAULT_SENTINEL_QUANTA,
            n_samples: DEFAULT_SAMPLES,
        }
    }
}

impl Default for LineSearchSection {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            nu_grid: Vec::new(),
            nu_samples: DEFAULT_NU_SAMPLES,
            extension: DEFAULT_NU_EXTENSION,
            jump_factor: DEFAULT_JUMP_FACTOR,
            trim: 0.0,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigmas: vec![0.001, 0.002, 0.004, 0.008], n_draws: 100, model: NoiseModel::PerTrace }
    }
}

impl Default for VerifierSection {
    fn default() -> Self {
        Self { hamiltonian: Hamiltonian::Full, substeps: DEFAULT_SUBSTEPS, n_samples: DEFAULT_SAMPLES }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<CostMode>,
    pub out: Option<PathBuf>,
}

/// Stream index of the noise seeds, clear of the per-method streams.
const NOISE_STREAM: usize = 1 << 20;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.master_seed = s;
        }
        if let Some(m) = o.mode {
            self.objective.mode = m;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.t_grid.is_empty() {
            return bad("t_grid is empty".into());
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("t_grid entries must be positive".into());
        }
        if self.t_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("t_grid must be strictly ascending".into());
        }
        for t in &self.line_search.times {
            if self.time_index(*t).is_none() {
                return bad(format!("line_search time {t:e} is not in t_grid"));
            }
        }
        if self.line_search.nu_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("line_search.nu_grid must be strictly ascending".into());
        }
        if !(self.line_search.jump_factor > 1.0) {
            return bad("line_search.jump_factor must exceed 1".into());
        }
        if !(0.0..1.0).contains(&self.line_search.trim) {
            return bad("line_search.trim must lie in [0, 1)".into());
        }
        if self.line_search.budget == 0 || self.line_search.nu_samples == 0 {
            return bad("line_search budget and nu_samples must be positive".into());
        }
        if self.noise.n_draws == 0 {
            return bad("noise.n_draws must be positive".into());
        }
        if self.noise.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise sigmas must be non-negative".into());
        }
        if self.objective.n_samples < 3 || self.verifier.n_samples < 3 || self.verifier.substeps == 0 {
            return bad("sample counts must be at least 3 and substeps positive".into());
        }
        if !(self.objective.epsilon >= 0.0 && self.objective.sentinel_quanta > 0.0) {
            return bad("objective epsilon must be non-negative and sentinel positive".into());
        }
        for m in &self.methods {
            self.optimizer_spec(m).validate()?;
        }
        for &t in &self.t_grid {
            self.physical(t).validate()?;
            derive_endpoints(&self.physical(t))?;
        }
        Ok(())
    }

    pub fn physical(&self, t_final: f64) -> PhysicalConfig {
        let p = &self.physical;
        PhysicalConfig::new(p.ion_mass_amu * ATOMIC_MASS_UNIT, p.omega0, p.alpha_final_ratio, p.distance_ratio, t_final)
    }

    pub fn endpoints(&self, t_final: f64) -> Result<(PhysicalConfig, Endpoints), CliError> {
        let cfg = self.physical(t_final);
        let ep = derive_endpoints(&cfg)?;
        Ok((cfg, ep))
    }

    pub fn objective(&self, t_final: f64) -> Result<Objective, CliError> {
        let (cfg, ep) = self.endpoints(t_final)?;
        let o = &self.objective;
        let mut spec = ObjectiveSpec::new(o.mode, &cfg);
        spec.epsilon = o.epsilon;
        spec.n_quantum = o.n_quantum;
        spec.sentinel = o.sentinel_quanta * cfg.hbar_omega0();
        let mut obj = Objective::new(cfg, ep, spec);
        obj.n_samples = o.n_samples;
        Ok(obj)
    }

    pub fn verify_context(&self, t_final: f64) -> Result<VerifyContext, CliError> {
        let (cfg, ep) = self.endpoints(t_final)?;
        let mut ctx = VerifyContext::new(cfg, ep);
        ctx.hamiltonian = self.verifier.hamiltonian;
        ctx.substeps = self.verifier.substeps;
        ctx.n_samples = self.verifier.n_samples;
        Ok(ctx)
    }

    /// The method's own seed: a stream of the master seed keyed by the method, so adding
    /// or reordering methods leaves the others untouched.
    pub fn optimizer_spec(&self, entry: &MethodEntry) -> OptimizerSpec {
        let stream = Method::ALL.iter().position(|m| *m == entry.method).unwrap_or(0);
        let dims = entry.dims.unwrap_or(match self.objective.mode {
            CostMode::Harmonic => 2,
            CostMode::Cubic => 3,
        });
        OptimizerSpec {
            method: entry.method,
            dims,
            method_params: entry.params,
            rng_seed: ionsep_core::optim::sweep_seed(self.master_seed, stream),
            budget: entry.budget,
        }
    }

    /// Seed of the draws at the i-th σ; shared by every protocol at that σ.
    pub fn noise_seed(&self, sigma_index: usize) -> u64 {
        ionsep_core::optim::sweep_seed(self.master_seed, NOISE_STREAM + sigma_index)
    }

    pub fn line_times(&self) -> Vec<f64> {
        if self.line_search.times.is_empty() {
            self.t_grid.clone()
        } else {
            self.line_search.times.clone()
        }
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.t_grid.iter().position(|g| same_time(*g, t))
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}
