use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stalled, Evaluator, Exhausted, Start};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealParams {
    pub initial_temperature: f64,
    /// Accepted moves between reannealings.
    pub reanneal_interval: usize,
    /// Ratio of the exponential schedule used until the first accepted improvement.
    pub cooling_ratio: f64,
    /// Stall window in iterations per dimension.
    pub stall_per_dim: usize,
    pub tol: f64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self { initial_temperature: 200.0, reanneal_interval: 10, cooling_ratio: 0.95, stall_per_dim: 500, tol: 1e-6 }
    }
}

/// Temperature after `k` annealing steps. Before the first accepted improvement the
/// schedule is T₀·rᵏ; afterwards T₀/(1 + k).
pub(crate) fn temperature(p: &AnnealParams, k: f64, improved: bool) -> f64 {
    let t = if improved { p.initial_temperature / (1.0 + k) } else { p.initial_temperature * p.cooling_ratio.powf(k) };
    t.max(1e-300)
}

pub(crate) fn minimize<R: Rng>(ev: &mut Evaluator, start: &Start, p: &AnnealParams, rng: &mut R) -> Result<bool, Exhausted> {
    let n = start.center.len();
    let mut x = start.center.clone();
    let mut fx = ev.eval(&x)?;
    let mut best = fx;
    let mut improved = false;
    let mut k = 0.0_f64;
    let mut accepted = 0usize;
    let window = p.stall_per_dim * n;
    let mut trace = vec![best];
    loop {
        let t = temperature(p, k, improved);
        let step = if improved { t.sqrt() } else { t };
        let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di / norm).collect();
        let fy = ev.eval(&y)?;
        let delta = fy - fx;
        let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp();
        k += 1.0;
        if accept {
            if delta < 0.0 {
                improved = true;
            }
            x = y;
            fx = fy;
            accepted += 1;
            if accepted % p.reanneal_interval.max(1) == 0 {
                k = (k / 2.0).floor();
            }
        }
        best = best.min(fy);
        trace.push(best);
        if trace.len() > window {
            let then = trace[trace.len() - 1 - window];
            if stalled(then, best, p.tol) {
                return Ok(true);
            }
        }
    }
}
