//! Line of minima through the cloud of optimized coefficient triples.
//!
//! The optimized (a₁₀, a₁₁, a₁₂) from all methods and final times fall close to a
//! straight line. [`fit_line`] finds it, [`nu_sweep`] seeds Nelder–Mead along
//! a′ = ā + ν·v and ranks the refined points by their verified excitation, and
//! [`classify_regions`] marks the interval around ν = 0 where that excitation varies
//! smoothly.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzParams;
use crate::cost::Objective;
use crate::error::{Error, Result};
use crate::optim::{self, Method, MethodParams, NelderMeadParams, SolutionCloud, Start};
use crate::verifier::VerifyContext;

pub const DEFAULT_NU_SAMPLES: usize = 161;
pub const DEFAULT_NU_EXTENSION: f64 = 0.5;
pub const DEFAULT_JUMP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub centroid: [f64; 3],
    /// Unit vector; the sign makes its largest-magnitude component positive.
    pub direction: [f64; 3],
    /// RMS orthogonal distance of the points from the line.
    pub residual_rms: f64,
}

impl LineFit {
    pub fn point(&self, nu: f64) -> [f64; 3] {
        [0, 1, 2].map(|i| self.centroid[i] + nu * self.direction[i])
    }

    pub fn project(&self, p: &[f64; 3]) -> f64 {
        (0..3).map(|i| (p[i] - self.centroid[i]) * self.direction[i]).sum()
    }

    pub fn distance(&self, p: &[f64; 3]) -> f64 {
        let q = self.point(self.project(p));
        (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Total-least-squares line: centroid plus the principal axis of the scatter matrix.
pub fn fit_line(points: &[[f64; 3]]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateCloud(format!("need at least 2 points, got {}", points.len())));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateCloud("non-finite coordinates".into()));
    }
    let n = points.len() as f64;
    let mut c = Vector3::zeros();
    for p in points {
        c += Vector3::from(*p);
    }
    c /= n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - c;
        scatter += d * d.transpose();
    }
    let total = scatter.trace();
    if !(total > 0.0) || total.sqrt() <= 1e-12 * c.norm().max(1.0) * n.sqrt() {
        return Err(Error::DegenerateCloud("all points coincide".into()));
    }
    let eig = SymmetricEigen::new(scatter);
    let top = eig.eigenvalues.imax();
    let mut dir: Vector3<f64> = eig.eigenvectors.column(top).into();
    dir /= dir.norm();
    if dir[dir.iamax()] < 0.0 {
        dir = -dir;
    }
    let residual = (total - eig.eigenvalues[top]).max(0.0);
    Ok(LineFit { centroid: c.into(), direction: dir.into(), residual_rms: (residual / n).sqrt() })
}

/// Fits, drops the `trim` fraction of points farthest from the line, and refits.
pub fn fit_line_trimmed(points: &[[f64; 3]], trim: f64) -> Result<LineFit> {
    let first = fit_line(points)?;
    if !(trim > 0.0) {
        return Ok(first);
    }
    if trim >= 1.0 {
        return Err(Error::InvalidConfig(format!("trim fraction {trim} must be below 1")));
    }
    let keep = ((points.len() as f64) * (1.0 - trim)).ceil().max(2.0) as usize;
    let mut ranked: Vec<(f64, [f64; 3])> = points.iter().map(|p| (first.distance(p), *p)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let kept: Vec<[f64; 3]> = ranked.into_iter().take(keep).map(|(_, p)| p).collect();
    fit_line(&kept)
}

pub fn fit_cloud(cloud: &SolutionCloud, trim: f64) -> Result<LineFit> {
    cloud.validate()?;
    fit_line_trimmed(&cloud.points(), trim)
}

/// ν grid of integer multiples of a fixed step over the projected range of the points,
/// widened by `extension` of that range on both sides. Always contains ν = 0.
pub fn default_nu_grid(fit: &LineFit, points: &[[f64; 3]], n_samples: usize, extension: f64) -> Vec<f64> {
    let (lo, hi) = points
        .iter()
        .map(|p| fit.project(p))
        .fold((0.0_f64, 0.0_f64), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    if !(span > 0.0) || n_samples < 2 {
        return vec![0.0];
    }
    let (lo, hi) = (lo - extension * span, hi + extension * span);
    let h = (hi - lo) / (n_samples - 1) as f64;
    let (k0, k1) = ((lo / h).ceil() as i64, (hi / h).floor() as i64);
    (k0..=k1).map(|k| k as f64 * h).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSample {
    pub nu: f64,
    pub seed: [f64; 3],
    pub refined: AnsatzParams,
    /// Surrogate cost at the refined point, in joules.
    pub objective: f64,
    /// Verified excitation in joules; `None` when the verifier rejected the protocol.
    pub e_exc: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSweepResult {
    pub t_final: f64,
    pub fit: LineFit,
    pub samples: Vec<NuSample>,
    /// Lowest excitation over all converged samples.
    pub best: Option<usize>,
    /// Lowest excitation inside the smooth region.
    pub local_best: Option<usize>,
    pub smooth: Option<(f64, f64)>,
    pub jump_factor: f64,
}

impl NuSweepResult {
    pub fn best_sample(&self) -> Option<&NuSample> {
        self.best.map(|i| &self.samples[i])
    }

    pub fn local_best_sample(&self) -> Option<&NuSample> {
        self.local_best.map(|i| &self.samples[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuSweepOptions {
    pub nm: NelderMeadParams,
    /// Evaluation budget of each refinement.
    pub budget: usize,
    pub jump_factor: f64,
}

impl Default for NuSweepOptions {
    fn default() -> Self {
        Self { nm: NelderMeadParams::default(), budget: optim::DEFAULT_BUDGET, jump_factor: DEFAULT_JUMP_FACTOR }
    }
}

/// Refines one seed with Nelder–Mead and verifies the result.
pub fn refine(seed: [f64; 3], objective: &Objective, ctx: &VerifyContext, opts: &NuSweepOptions) -> (AnsatzParams, f64, Option<f64>, bool) {
    let params = MethodParams { nm: opts.nm, ..MethodParams::default() };
    let mut f = |x: &[f64]| objective.value_quanta([x[0], x[1], x[2]]);
    let start = Start { center: seed.to_vec(), warm: true };
    let min = optim::minimize(Method::NM, &params, &mut f, &start, opts.budget, 0);
    let refined = objective.params([min.x[0], min.x[1], min.x[2]]);
    let report = objective.report(&refined);
    let physical = report.f_total < objective.spec.sentinel;
    let e_exc = if physical { ctx.verify(&refined).ok().map(|(r, _)| r.e_exc) } else { None };
    let converged = min.converged && physical && e_exc.is_some_and(f64::is_finite);
    (refined, report.f_total, e_exc, converged)
}

/// Sweeps ν along the fitted line at the objective's final time.
pub fn nu_sweep(
    fit: &LineFit,
    nu_grid: &[f64],
    objective: &Objective,
    ctx: &VerifyContext,
    opts: &NuSweepOptions,
) -> Result<NuSweepResult> {
    if nu_grid.is_empty() {
        return Err(Error::InvalidConfig("empty nu grid".into()));
    }
    if nu_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("nu grid must be strictly ascending".into()));
    }
    let samples: Vec<NuSample> = nu_grid
        .iter()
        .map(|&nu| {
            let seed = fit.point(nu);
            let (refined, value, e_exc, converged) = refine(seed, objective, ctx, opts);
            NuSample { nu, seed, refined, objective: value, e_exc, converged }
        })
        .collect();
    let mut result = NuSweepResult {
        t_final: objective.config.t_final,
        fit: *fit,
        samples,
        best: None,
        local_best: None,
        smooth: None,
        jump_factor: opts.jump_factor,
    };
    result.best = argmin(&result.samples, |_| true);
    result.smooth = classify_regions(&result.samples, opts.jump_factor).ok();
    if let Some((lo, hi)) = result.smooth {
        result.local_best = argmin(&result.samples, |s| s.nu >= lo && s.nu <= hi);
    }
    Ok(result)
}

fn argmin(samples: &[NuSample], keep: impl Fn(&NuSample) -> bool) -> Option<usize> {
    samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.converged && keep(s))
        .filter_map(|(i, s)| s.e_exc.map(|e| (i, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// The widest run of consecutive samples around ν = 0 (the sample nearest zero) in which
/// every sample converged and neighbouring excitations differ by less than `jump_factor`.
pub fn classify_regions(samples: &[NuSample], jump_factor: f64) -> Result<(f64, f64)> {
    let found = samples.iter().filter(|s| s.converged && s.e_exc.is_some()).count();
    if found < 3 {
        return Err(Error::InsufficientSamples { needed: 3, found });
    }
    let origin = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.nu.abs().total_cmp(&b.1.nu.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let log_e = |s: &NuSample| s.e_exc.filter(|_| s.converged).map(|e| e.max(f64::MIN_POSITIVE).ln());
    if log_e(&samples[origin]).is_none() {
        return Err(Error::NoSmoothRegion);
    }
    let threshold = jump_factor.ln();
    let joined = |a: usize, b: usize| match (log_e(&samples[a]), log_e(&samples[b])) {
        (Some(x), Some(y)) => (x - y).abs() < threshold,
        _ => false,
    };
    let (mut lo, mut hi) = (origin, origin);
    while lo > 0 && joined(lo - 1, lo) {
        lo -= 1;
    }
    while hi + 1 < samples.len() && joined(hi, hi + 1) {
        hi += 1;
    }
    Ok((samples[lo].nu, samples[hi].nu))
}
