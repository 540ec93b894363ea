//! Derivative-free minimizers for the free ansatz coefficients and the warm-started
//! sweep over final times.
//!
//! Every method works on a plain `FnMut(&[f64]) -> f64` routed through [`Evaluator`],
//! which enforces the evaluation budget and records the best-so-far history. The
//! physics objective is fed to them in units of ħω₀.

mod anneal;
mod cma;
mod genetic;
mod nelder_mead;
mod swarm;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzParams;
use crate::cost::Objective;
use crate::error::{Error, Result};

pub use anneal::AnnealParams;
pub use cma::CmaParams;
pub use genetic::GeneticParams;
pub use nelder_mead::NelderMeadParams;
pub use swarm::SwarmParams;

pub const DEFAULT_BUDGET: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    NM,
    GA,
    PS,
    SA,
    CMA,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::NM, Method::GA, Method::PS, Method::SA, Method::CMA];

    pub fn name(&self) -> &'static str {
        match self {
            Method::NM => "NM",
            Method::GA => "GA",
            Method::PS => "PS",
            Method::SA => "SA",
            Method::CMA => "CMA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NM" => Ok(Method::NM),
            "GA" => Ok(Method::GA),
            "PS" => Ok(Method::PS),
            "SA" => Ok(Method::SA),
            "CMA" => Ok(Method::CMA),
            other => Err(Error::InvalidConfig(format!("unknown optimizer '{other}'"))),
        }
    }
}

/// Hyperparameters of all five methods; only the bundle matching the method is read.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    pub nm: NelderMeadParams,
    pub ga: GeneticParams,
    pub ps: SwarmParams,
    pub sa: AnnealParams,
    pub cma: CmaParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub method: Method,
    /// 2 pins a₁₂ = 0, 3 frees all coefficients.
    pub dims: usize,
    #[serde(default)]
    pub method_params: MethodParams,
    pub rng_seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

impl OptimizerSpec {
    pub fn new(method: Method, dims: usize, rng_seed: u64) -> Self {
        Self { method, dims, method_params: MethodParams::default(), rng_seed, budget: DEFAULT_BUDGET }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dims == 2 || self.dims == 3) {
            return Err(Error::InvalidConfig(format!("dims must be 2 or 3, got {}", self.dims)));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        Ok(())
    }
}

/// Signals that the evaluation budget ran out mid-iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exhausted;

/// Budgeted objective wrapper shared by every method.
pub struct Evaluator<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    budget: usize,
    n_evals: usize,
    best_x: Vec<f64>,
    best_f: f64,
    history: Vec<(usize, f64)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(f: &'a mut dyn FnMut(&[f64]) -> f64, budget: usize) -> Self {
        Self { f, budget, n_evals: 0, best_x: Vec::new(), best_f: f64::INFINITY, history: Vec::new() }
    }

    pub fn eval(&mut self, x: &[f64]) -> std::result::Result<f64, Exhausted> {
        if self.n_evals >= self.budget {
            return Err(Exhausted);
        }
        self.n_evals += 1;
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        if v < self.best_f || self.best_x.is_empty() {
            self.best_f = v;
            self.best_x = x.to_vec();
            self.history.push((self.n_evals, v));
        }
        Ok(v)
    }

    pub fn n_evals(&self) -> usize {
        self.n_evals
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.n_evals
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.best_x, self.best_f)
    }
}

/// Where a run starts: a seed point, and whether it is a warm restart from a previous
/// optimum (population methods then use their narrow spread).
#[derive(Debug, Clone, PartialEq)]
pub struct Start {
    pub center: Vec<f64>,
    pub warm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub n_evals: usize,
    pub history: Vec<(usize, f64)>,
    /// The method's own stopping rule fired before the budget ran out.
    pub converged: bool,
}

/// Minimizes `f` with the chosen method. Deterministic for a fixed `rng_seed`.
pub fn minimize(
    method: Method,
    params: &MethodParams,
    f: &mut dyn FnMut(&[f64]) -> f64,
    start: &Start,
    budget: usize,
    rng_seed: u64,
) -> Minimum {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut ev = Evaluator::new(f, budget);
    let outcome = match method {
        Method::NM => nelder_mead::minimize(&mut ev, start, &params.nm),
        Method::GA => genetic::minimize(&mut ev, start, &params.ga, &mut rng),
        Method::PS => swarm::minimize(&mut ev, start, &params.ps, &mut rng),
        Method::SA => anneal::minimize(&mut ev, start, &params.sa, &mut rng),
        Method::CMA => cma::minimize(&mut ev, start, &params.cma, &mut rng),
    };
    let (x, value) = ev.best();
    Minimum {
        x: x.to_vec(),
        value,
        n_evals: ev.n_evals,
        history: ev.history,
        converged: outcome.unwrap_or(false),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRun {
    pub method: Method,
    pub dims: usize,
    pub t_final: f64,
    pub rng_seed: u64,
    pub best_params: AnsatzParams,
    /// Objective at `best_params`, in joules.
    pub best_value: f64,
    pub n_evals: usize,
    /// (evaluation index, best so far in units of ħω₀)
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

impl OptimizerRun {
    pub fn free(&self) -> [f64; 3] {
        self.best_params.free()
    }
}

fn embed(x: &[f64]) -> [f64; 3] {
    [x[0], x[1], if x.len() > 2 { x[2] } else { 0.0 }]
}

/// One optimization at the objective's final time.
pub fn run(spec: &OptimizerSpec, seed_point: [f64; 3], warm: bool, objective: &Objective) -> Result<OptimizerRun> {
    spec.validate()?;
    if seed_point.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("seed point must be finite".into()));
    }
    let mut f = |x: &[f64]| objective.value_quanta(embed(x));
    let start = Start { center: seed_point[..spec.dims].to_vec(), warm };
    let min = minimize(spec.method, &spec.method_params, &mut f, &start, spec.budget, spec.rng_seed);
    let best_params = objective.params(embed(&min.x));
    Ok(OptimizerRun {
        method: spec.method,
        dims: spec.dims,
        t_final: objective.config.t_final,
        rng_seed: spec.rng_seed,
        best_params,
        best_value: objective.value(&best_params),
        n_evals: min.n_evals,
        history: min.history,
        converged: min.converged,
    })
}

/// Seed of the i-th run of a sweep: an independent ChaCha stream of `master`.
pub fn sweep_seed(master: u64, index: usize) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

/// Runs `spec` at each final time in turn, cold at the first and warm-started from
/// the previous optimum afterwards. A failed run leaves the warm seed unchanged.
pub fn sweep_times(spec: &OptimizerSpec, t_grid: &[f64], objective: &Objective) -> Vec<Result<OptimizerRun>> {
    if let Err(e) = spec.validate() {
        return vec![Err(e)];
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return vec![Err(Error::InvalidConfig("t_grid must be strictly ascending".into()))];
    }
    let mut seed = [0.0; 3];
    let mut warm = false;
    let mut out = Vec::with_capacity(t_grid.len());
    for (i, &t_f) in t_grid.iter().enumerate() {
        let mut obj = *objective;
        obj.config = obj.config.with_t_final(t_f);
        let mut s = *spec;
        s.rng_seed = sweep_seed(spec.rng_seed, i);
        let r = obj.config.validate().and_then(|_| run(&s, seed, warm, &obj));
        if let Ok(r) = &r {
            seed = r.free();
            warm = true;
        }
        out.push(r);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudEntry {
    pub method: Method,
    pub t_final: f64,
    pub a10: f64,
    pub a11: f64,
    pub a12: f64,
    pub e_exc: f64,
}

impl CloudEntry {
    pub fn point(&self) -> [f64; 3] {
        [self.a10, self.a11, self.a12]
    }
}

/// Optimized coefficient triples from every method and final time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolutionCloud {
    pub entries: Vec<CloudEntry>,
}

impl SolutionCloud {
    pub fn push(&mut self, run: &OptimizerRun, e_exc: f64) {
        let [a10, a11, a12] = run.free();
        self.entries.push(CloudEntry { method: run.method, t_final: run.t_final, a10, a11, a12, e_exc });
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.entries.iter().map(CloudEntry::point).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::DegenerateCloud("empty cloud".into()));
        }
        if self.entries.iter().any(|e| e.point().iter().any(|v| !v.is_finite())) {
            return Err(Error::DegenerateCloud("non-finite coefficients".into()));
        }
        Ok(())
    }
}

/// Uniform sample in the box `center ± half_width`.
pub(crate) fn uniform_box<R: rand::Rng>(rng: &mut R, center: &[f64], half_width: f64) -> Vec<f64> {
    center.iter().map(|c| c + half_width * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// Relative stall test on a best-value trace.
pub(crate) fn stalled(then: f64, now: f64, tol: f64) -> bool {
    (then - now) <= tol * now.abs().max(f64::MIN_POSITIVE)
}
