//! The four subcommands. Each returns what it wrote, so tests can inspect results
//! without re-reading files.

use std::path::{Path, PathBuf};

use ionsep_core::line::{self, LineFit, NuSample, NuSweepOptions};
use ionsep_core::optim::{self, Method, NelderMeadParams, SolutionCloud};
use ionsep_core::verifier::{self, ExcitationReport, NoiseStudy};
use ionsep_core::AnsatzParams;
use serde::{Deserialize, Serialize};

use crate::artifacts::{note, num, opt, read_json, OutDir};
use crate::config::{same_time, ExperimentConfig};
use crate::CliError;

/// Free coefficients of one protocol at one final time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub t_final: f64,
    pub a10: f64,
    pub a11: f64,
    pub a12: f64,
}

impl ParamsFile {
    pub fn new(t_final: f64, free: [f64; 3]) -> Self {
        Self { t_final, a10: free[0], a11: free[1], a12: free[2] }
    }

    pub fn free(&self) -> [f64; 3] {
        [self.a10, self.a11, self.a12]
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let p: Self = read_json(path)?;
        if !(p.t_final > 0.0 && p.t_final.is_finite()) || p.free().iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{}: t_final must be positive and coefficients finite", path.display())));
        }
        Ok(p)
    }
}

fn time_tag(t: f64) -> String {
    format!("{:.2}us", t * 1e6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub dims: usize,
    pub t_final: f64,
    pub rng_seed: u64,
    pub a10: f64,
    pub a11: f64,
    pub a12: f64,
    /// Objective (F or F_qub) in ħω₀.
    pub objective_quanta: f64,
    pub e_exc_quanta: Option<f64>,
    /// Largest β(t) sample, J/m⁴.
    pub beta_max: Option<f64>,
    pub n_evals: usize,
    pub converged: bool,
    pub error: Option<String>,
    /// (evaluation, best so far in ħω₀)
    pub history: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct OptimizeOutcome {
    pub records: Vec<RunRecord>,
    pub cloud: SolutionCloud,
    pub warnings: Vec<String>,
}

impl OptimizeOutcome {
    pub fn find(&self, method: Method, t_final: f64) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.method == method && same_time(r.t_final, t_final) && r.error.is_none())
    }
}

/// Runs every configured method over the time grid, verifies each optimum, and writes
/// runs.jsonl, summary.csv, cloud.json and one params file per run.
pub fn optimize(cfg: &ExperimentConfig) -> Result<OptimizeOutcome, CliError> {
    let mut outcome = OptimizeOutcome::default();
    if cfg.methods.is_empty() {
        let w = "warning: no optimization methods configured; nothing to do".to_string();
        note(&w);
        outcome.warnings.push(w);
        return Ok(outcome);
    }
    let out = OutDir::create(cfg)?;
    let objective = cfg.objective(cfg.t_grid[0])?;
    let mut per_method: Vec<Vec<RunRecord>> = Vec::new();
    for entry in &cfg.methods {
        let spec = cfg.optimizer_spec(entry);
        let runs = optim::sweep_times(&spec, &cfg.t_grid, &objective);
        let mut records = Vec::new();
        for (i, result) in runs.into_iter().enumerate() {
            let t = cfg.t_grid[i.min(cfg.t_grid.len() - 1)];
            let rec = match result {
                Ok(run) => {
                    let ctx = cfg.verify_context(run.t_final)?;
                    let verified = ctx.verify(&run.best_params);
                    let [a10, a11, a12] = run.free();
                    let hw = objective.config.hbar_omega0();
                    if let Ok((report, _)) = &verified {
                        outcome.cloud.push(&run, report.e_exc);
                    }
                    RunRecord {
                        method: run.method,
                        dims: run.dims,
                        t_final: run.t_final,
                        rng_seed: run.rng_seed,
                        a10,
                        a11,
                        a12,
                        objective_quanta: run.best_value / hw,
                        e_exc_quanta: verified.as_ref().ok().map(|(r, _)| r.e_exc_quanta),
                        beta_max: verified.as_ref().ok().map(|(_, wf)| wf.beta_max().1),
                        n_evals: run.n_evals,
                        converged: run.converged,
                        error: verified.err().map(|e| format!("verification failed: {e}")),
                        history: run.history,
                    }
                }
                Err(e) => RunRecord {
                    method: entry.method,
                    dims: spec.dims,
                    t_final: t,
                    rng_seed: optim::sweep_seed(spec.rng_seed, i),
                    a10: f64::NAN,
                    a11: f64::NAN,
                    a12: f64::NAN,
                    objective_quanta: f64::NAN,
                    e_exc_quanta: None,
                    beta_max: None,
                    n_evals: 0,
                    converged: false,
                    error: Some(e.to_string()),
                    history: Vec::new(),
                },
            };
            if let Some(err) = &rec.error {
                let w = format!("warning: {} at t_f = {:e} s: {err}", rec.method, rec.t_final);
                note(&w);
                outcome.warnings.push(w);
            }
            if rec.a10.is_finite() {
                out.json(
                    &format!("params/{}_{}.json", rec.method, time_tag(rec.t_final)),
                    &ParamsFile::new(rec.t_final, [rec.a10, rec.a11, rec.a12]),
                )?;
            }
            records.push(rec);
        }
        per_method.push(records);
    }
    // time-major order for the table
    for i in 0..cfg.t_grid.len() {
        for recs in &per_method {
            if let Some(r) = recs.get(i) {
                outcome.records.push(r.clone());
            }
        }
    }

    out.jsonl("runs.jsonl", &outcome.records)?;
    let rows: Vec<Vec<String>> = outcome
        .records
        .iter()
        .map(|r| {
            let cma = outcome.find(Method::CMA, r.t_final).and_then(|c| c.e_exc_quanta);
            let ratio = match (r.e_exc_quanta, cma) {
                (Some(e), Some(c)) if c > 0.0 => Some(e / c),
                _ => None,
            };
            vec![
                num(r.t_final),
                r.method.to_string(),
                num(r.objective_quanta),
                opt(r.e_exc_quanta),
                opt(ratio),
                num(r.a10),
                num(r.a11),
                num(r.a12),
                r.converged.to_string(),
            ]
        })
        .collect();
    out.csv(
        "summary.csv",
        &["t_final", "method", "objective_quanta", "e_exc_quanta", "e_exc_over_cma", "a10", "a11", "a12", "converged"],
        &rows,
    )?;
    out.json("cloud.json", &outcome.cloud)?;

    if outcome.records.iter().all(|r| r.error.is_some()) {
        return Err(CliError::Run("every optimization run failed".into()));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t_final: f64,
    pub fit: LineFit,
    pub samples: Vec<NuSample>,
    pub best: Option<usize>,
    pub local_best: Option<usize>,
    pub smooth: Option<(f64, f64)>,
    pub jump_factor: f64,
    pub best_e_exc_quanta: Option<f64>,
    pub local_e_exc_quanta: Option<f64>,
    /// E_exc of the cloud's CMA entry at the same final time.
    pub cma_e_exc_quanta: Option<f64>,
    /// E_exc(CMA) / E_exc(best)
    pub improvement: Option<f64>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn best_sample(&self) -> Option<&NuSample> {
        self.best.map(|i| &self.samples[i])
    }

    pub fn local_best_sample(&self) -> Option<&NuSample> {
        self.local_best.map(|i| &self.samples[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFitRecord {
    pub fit: LineFit,
    pub n_points: usize,
    pub nu_grid: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub fit: LineFit,
    pub nu_grid: Vec<f64>,
    pub sweeps: Vec<SweepRecord>,
}

pub fn default_cloud_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("cloud.json")
}

/// Fits the line through the cloud, sweeps ν at each line-search time, and writes
/// line_fit.json, line_search.jsonl, nu_sweep.csv, line_summary.csv and best/local params.
pub fn line_search(cfg: &ExperimentConfig, cloud_path: Option<&Path>) -> Result<LineSearchOutcome, CliError> {
    let path = cloud_path.map(Path::to_path_buf).unwrap_or_else(|| default_cloud_path(cfg));
    let cloud: SolutionCloud = read_json(&path)?;
    if cloud.entries.len() < 2 {
        return Err(CliError::Config(format!("{}: need at least 2 cloud entries, found {}", path.display(), cloud.entries.len())));
    }
    let fit = line::fit_cloud(&cloud, cfg.line_search.trim).map_err(|e| CliError::Config(e.to_string()))?;
    note(&format!("line fit through {} points: residual_rms = {:e}", cloud.entries.len(), fit.residual_rms));
    let ls = &cfg.line_search;
    let nu_grid = if ls.nu_grid.is_empty() {
        line::default_nu_grid(&fit, &cloud.points(), ls.nu_samples, ls.extension)
    } else {
        ls.nu_grid.clone()
    };
    let opts = NuSweepOptions { nm: NelderMeadParams::default(), budget: ls.budget, jump_factor: ls.jump_factor };

    let out = OutDir::create(cfg)?;
    out.json("line_fit.json", &LineFitRecord { fit, n_points: cloud.entries.len(), nu_grid: nu_grid.clone() })?;
    let mut sweeps = Vec::new();
    for t in cfg.line_times() {
        let objective = cfg.objective(t)?;
        let ctx = cfg.verify_context(t)?;
        let hw = objective.config.hbar_omega0();
        let cma = cloud
            .entries
            .iter()
            .find(|e| e.method == Method::CMA && same_time(e.t_final, t))
            .map(|e| e.e_exc / hw);
        let rec = match line::nu_sweep(&fit, &nu_grid, &objective, &ctx, &opts) {
            Ok(r) => {
                let q = |s: Option<&NuSample>| s.and_then(|s| s.e_exc).map(|e| e / hw);
                let best = q(r.best_sample());
                let local = q(r.local_best_sample());
                SweepRecord {
                    t_final: t,
                    fit,
                    best: r.best,
                    local_best: r.local_best,
                    smooth: r.smooth,
                    jump_factor: r.jump_factor,
                    best_e_exc_quanta: best,
                    local_e_exc_quanta: local,
                    cma_e_exc_quanta: cma,
                    improvement: match (cma, best) {
                        (Some(c), Some(b)) if b > 0.0 => Some(c / b),
                        _ => None,
                    },
                    error: None,
                    samples: r.samples,
                }
            }
            Err(e) => SweepRecord {
                t_final: t,
                fit,
                samples: Vec::new(),
                best: None,
                local_best: None,
                smooth: None,
                jump_factor: ls.jump_factor,
                best_e_exc_quanta: None,
                local_e_exc_quanta: None,
                cma_e_exc_quanta: cma,
                improvement: None,
                error: Some(e.to_string()),
            },
        };
        if let Some(s) = rec.best_sample() {
            out.json(&format!("params/best_{}.json", time_tag(t)), &ParamsFile::new(t, s.refined.free()))?;
        }
        if let Some(s) = rec.local_best_sample() {
            out.json(&format!("params/local_{}.json", time_tag(t)), &ParamsFile::new(t, s.refined.free()))?;
        }
        if let Some(r) = rec.improvement {
            note(&format!("t_f = {:e} s: best E_exc improves on CMA by a factor {r:.3}", t));
        }
        sweeps.push(rec);
    }

    out.jsonl("line_search.jsonl", &sweeps)?;
    let mut rows = Vec::new();
    for s in &sweeps {
        let hw = cfg.physical(s.t_final).hbar_omega0();
        for p in &s.samples {
            let smooth = s.smooth.is_some_and(|(lo, hi)| p.nu >= lo && p.nu <= hi);
            let [a10, a11, a12] = p.refined.free();
            rows.push(vec![
                num(s.t_final),
                num(p.nu),
                num(p.seed[0]),
                num(p.seed[1]),
                num(p.seed[2]),
                num(a10),
                num(a11),
                num(a12),
                num(p.objective / hw),
                opt(p.e_exc.map(|e| e / hw)),
                p.converged.to_string(),
                smooth.to_string(),
            ]);
        }
    }
    out.csv(
        "nu_sweep.csv",
        &[
            "t_final", "nu", "seed_a10", "seed_a11", "seed_a12", "a10", "a11", "a12", "objective_quanta", "e_exc_quanta",
            "converged", "smooth",
        ],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = sweeps
        .iter()
        .map(|s| {
            vec![
                num(s.t_final),
                opt(s.best_sample().map(|p| p.nu)),
                opt(s.best_e_exc_quanta),
                opt(s.local_best_sample().map(|p| p.nu)),
                opt(s.local_e_exc_quanta),
                opt(s.cma_e_exc_quanta),
                opt(s.improvement),
                opt(s.smooth.map(|r| r.0)),
                opt(s.smooth.map(|r| r.1)),
            ]
        })
        .collect();
    out.csv(
        "line_summary.csv",
        &[
            "t_final", "best_nu", "best_e_exc_quanta", "local_nu", "local_e_exc_quanta", "cma_e_exc_quanta", "improvement",
            "smooth_lo", "smooth_hi",
        ],
        &rows,
    )?;
    if sweeps.iter().all(|s| s.best.is_none()) {
        return Err(CliError::Run("no line-search sample converged at any final time".into()));
    }
    Ok(LineSearchOutcome { fit, nu_grid, sweeps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub params: ParamsFile,
    pub report: ExcitationReport,
    pub objective_quanta: f64,
    pub beta_max: f64,
    pub beta_max_time: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub quintic_residual: f64,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "params".into())
}

/// Reconstructs the controls of one parameter file, reports E_exc and the β peak, and
/// writes verify_<stem>.json and waveforms_<stem>.csv.
pub fn verify(cfg: &ExperimentConfig, params_path: &Path) -> Result<VerifyRecord, CliError> {
    let pf = ParamsFile::read(params_path)?;
    let objective = cfg.objective(pf.t_final)?;
    let ctx = cfg.verify_context(pf.t_final)?;
    let params: AnsatzParams = objective.params(pf.free());
    let (report, wf) = ctx
        .verify(&params)
        .map_err(|e| CliError::Run(format!("{}: protocol rejected: {e}", params_path.display())))?;
    let (k, beta_max) = wf.beta_max();
    let rec = VerifyRecord {
        params: pf,
        report,
        objective_quanta: objective.value(&params) / objective.config.hbar_omega0(),
        beta_max,
        beta_max_time: wf.grid[k],
        alpha_min: wf.alpha.iter().copied().fold(f64::INFINITY, f64::min),
        alpha_max: wf.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        quintic_residual: wf.max_quintic_residual(objective.config.coulomb_const),
    };
    let out = OutDir::create(cfg)?;
    let name = stem(params_path);
    out.json(&format!("verify_{name}.json"), &rec)?;
    let rows: Vec<Vec<String>> =
        (0..wf.len()).map(|i| vec![num(wf.grid[i]), num(wf.alpha[i]), num(wf.beta[i]), num(wf.d[i])]).collect();
    out.csv(&format!("waveforms_{name}.csv"), &["t", "alpha", "beta", "d"], &rows)?;
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub label: String,
    pub params: ParamsFile,
    pub study: Option<NoiseStudy>,
    pub mean_quanta: Option<f64>,
    pub nominal_quanta: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// First protocol on the command line.
    pub candidate: String,
    /// Second protocol on the command line.
    pub baseline: String,
    /// (σ, mean E_exc candidate / mean E_exc baseline)
    pub ratios: Vec<(f64, Option<f64>)>,
    /// Smallest swept σ at which the candidate's mean excitation is no longer below the
    /// baseline's.
    pub crossover_sigma: Option<f64>,
}

/// First σ (in sweep order) whose ratio is ≥ 1.
pub fn crossover_sigma(ratios: &[(f64, Option<f64>)]) -> Option<f64> {
    ratios.iter().find(|(_, r)| r.is_some_and(|r| r >= 1.0)).map(|(s, _)| *s)
}

#[derive(Debug, Clone)]
pub struct NoiseOutcome {
    pub records: Vec<NoiseRecord>,
    pub crossover: Option<Crossover>,
}

/// Noise ensembles for every (protocol, σ); the draws at a given σ are shared by all
/// protocols. Writes noise.jsonl, noise_draws.csv, noise_summary.csv and, with two or more
/// protocols, crossover.json comparing the first against the second.
pub fn noise(cfg: &ExperimentConfig, params_paths: &[PathBuf]) -> Result<NoiseOutcome, CliError> {
    if params_paths.is_empty() {
        return Err(CliError::Config("noise needs at least one params file".into()));
    }
    let protocols: Vec<(String, ParamsFile)> =
        params_paths.iter().map(|p| Ok((stem(p), ParamsFile::read(p)?))).collect::<Result<_, CliError>>()?;
    let out = OutDir::create(cfg)?;
    let mut records = Vec::new();
    for (si, &sigma) in cfg.noise.sigmas.iter().enumerate() {
        let seed = cfg.noise_seed(si);
        for (label, pf) in &protocols {
            let objective = cfg.objective(pf.t_final)?;
            let ctx = cfg.verify_context(pf.t_final)?;
            let hw = objective.config.hbar_omega0();
            let params = objective.params(pf.free());
            let rec = match verifier::noise_study(&params, sigma, cfg.noise.n_draws, seed, cfg.noise.model, &ctx) {
                Ok(study) => NoiseRecord {
                    label: label.clone(),
                    params: *pf,
                    mean_quanta: Some(study.mean / hw).filter(|v| v.is_finite()),
                    nominal_quanta: Some(study.nominal_e_exc / hw),
                    study: Some(study),
                    error: None,
                },
                Err(e) => {
                    note(&format!("warning: {label} at sigma = {sigma}: {e}"));
                    NoiseRecord {
                        label: label.clone(),
                        params: *pf,
                        study: None,
                        mean_quanta: None,
                        nominal_quanta: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            records.push(rec);
        }
    }

    out.jsonl("noise.jsonl", &records)?;
    let mut draws = Vec::new();
    for r in &records {
        if let Some(s) = &r.study {
            let hw = cfg.physical(r.params.t_final).hbar_omega0();
            for (i, e) in s.e_exc_samples.iter().enumerate() {
                draws.push(vec![r.label.clone(), num(s.sigma), i.to_string(), opt(e.map(|e| e / hw))]);
            }
        }
    }
    out.csv("noise_draws.csv", &["label", "sigma", "draw", "e_exc_quanta"], &draws)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let hw = cfg.physical(r.params.t_final).hbar_omega0();
            let stat = |f: fn(&NoiseStudy) -> f64| r.study.as_ref().map(|s| f(s) / hw).filter(|v| v.is_finite());
            vec![
                r.label.clone(),
                r.study.as_ref().map(|s| num(s.sigma)).unwrap_or_default(),
                opt(r.nominal_quanta),
                opt(r.mean_quanta),
                opt(stat(|s| s.median)),
                opt(stat(|s| s.max)),
                r.study.as_ref().map(|s| s.n_failed.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    out.csv(
        "noise_summary.csv",
        &["label", "sigma", "nominal_quanta", "mean_quanta", "median_quanta", "max_quanta", "n_failed"],
        &rows,
    )?;

    let crossover = (protocols.len() >= 2).then(|| {
        let n = protocols.len();
        let mean = |which: usize, si: usize| records[si * n + which].mean_quanta;
        let ratios: Vec<(f64, Option<f64>)> = cfg
            .noise
            .sigmas
            .iter()
            .enumerate()
            .map(|(si, &s)| {
                let r = match (mean(0, si), mean(1, si)) {
                    (Some(x), Some(y)) if y > 0.0 => Some(x / y),
                    _ => None,
                };
                (s, r)
            })
            .collect();
        Crossover {
            candidate: protocols[0].0.clone(),
            baseline: protocols[1].0.clone(),
            crossover_sigma: crossover_sigma(&ratios),
            ratios,
        }
    });
    if let Some(c) = &crossover {
        out.json("crossover.json", c)?;
    }
    if records.iter().all(|r| r.study.is_none()) {
        return Err(CliError::Run("no noise study could be run".into()));
    }
    Ok(NoiseOutcome { records, crossover })
}
